"""Lexical relation learning over word-embedding difference vectors.

The representation of a word pair (w1, w2) is the offset between the two
embedding vectors, v(w2) - v(w1).  This package provides the machinery to
cluster those offsets, classify them into relation types, and measure how
well the offsets capture lexical relations under closed-world and
open-world evaluation protocols.
"""

__version__ = "0.1.0"
