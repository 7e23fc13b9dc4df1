"""Loading, validating, and transforming word embedding tables.

Two on-disk formats are supported:

* text: an optional first line ``<count> <dim>``, then one line per word
  consisting of the word followed by ``dim`` space-separated decimal
  floats (UTF-8).
* binary: an ASCII header line ``<count> <dim>\\n``, then for each word the
  UTF-8 word bytes terminated by a single space, followed by ``dim``
  little-endian IEEE-754 float32 values.

Tables are immutable after construction; every transform returns a new
table, so concurrent readers never need locks.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file violates its declared format."""


@dataclass(frozen=True)
class EmbeddingTable:
    """An immutable vocabulary -> dense vector map.

    ``vectors`` is a (len(words), dim) float64 matrix whose rows align with
    ``words``; word order is preserved from the source file.
    """

    dim: int
    words: tuple[str, ...]
    vectors: np.ndarray
    normalized: bool = False
    source_id: str = ""
    duplicates_dropped: int = 0
    _index: dict[str, int] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be a positive integer")
        if self.vectors.shape != (len(self.words), self.dim):
            raise ValueError(
                f"vector matrix shape {self.vectors.shape} does not match "
                f"{len(self.words)} words of dim {self.dim}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding matrix contains non-finite values")
        index: dict[str, int] = {}
        for i, word in enumerate(self.words):
            if not word:
                raise ValueError(f"empty word at row {i}")
            if word in index:
                raise ValueError(f"duplicate word {word!r} at row {i}")
            index[word] = i
        object.__setattr__(self, "_index", index)
        self.vectors.setflags(write=False)
        if self.normalized:
            norms = np.linalg.norm(self.vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                worst = int(np.argmax(np.abs(norms - 1.0)))
                raise ValueError(
                    f"table is flagged normalized but {self.words[worst]!r} "
                    f"has norm {norms[worst]!r}"
                )

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.vectors[self._index[word]]
        except KeyError:
            raise KeyError(f"word {word!r} not in embedding table") from None

    def rows(self, words: Sequence[str]) -> np.ndarray:
        """Stack the vectors for ``words`` into a matrix, in the given order."""
        return self.vectors[[self._index[w] for w in words]]

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, word in enumerate(self.words):
            yield word, self.vectors[i]

    def vocab(self) -> set[str]:
        return set(self.words)

    def norm_stats(self) -> dict[str, float]:
        norms = np.linalg.norm(self.vectors, axis=1)
        return {
            "min": float(norms.min()),
            "mean": float(norms.mean()),
            "max": float(norms.max()),
        }


def _build_table(pairs: Iterable[tuple[str, np.ndarray]], dim: int, source_id: str,
                 lowercase: bool) -> EmbeddingTable:
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    duplicates = 0
    for word, vec in pairs:
        if lowercase:
            word = word.lower()
        if word in seen:
            duplicates += 1
            continue
        seen.add(word)
        words.append(word)
        rows.append(vec)
    if duplicates:
        log.warning("%s: dropped %d duplicate words (first occurrence kept)", source_id, duplicates)
    matrix = np.vstack(rows) if rows else np.empty((0, dim))
    return EmbeddingTable(dim=dim, words=tuple(words), vectors=matrix,
                          source_id=source_id, duplicates_dropped=duplicates)


def _parse_text(path: str) -> tuple[list[tuple[str, np.ndarray]], int]:
    pairs: list[tuple[str, np.ndarray]] = []
    dim = 0
    with open(path, encoding="utf-8") as handle:
        first_data_line = 1
        first = handle.readline()
        if not first:
            raise EmbeddingFormatError(f"{path}: empty file")
        tokens = first.split()
        if len(tokens) == 2:
            try:
                declared_count, dim = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: line 1: malformed header {first.strip()!r}"
                ) from None
            if declared_count < 0 or dim <= 0:
                raise EmbeddingFormatError(f"{path}: line 1: malformed header {first.strip()!r}")
            first_data_line = 2
        else:
            pairs.append(_parse_text_row(path, 1, tokens, 0))
            dim = pairs[0][1].size
        for lineno, line in enumerate(handle, start=first_data_line):
            tokens = line.split()
            if not tokens:
                continue
            pairs.append(_parse_text_row(path, lineno, tokens, dim))
    return pairs, dim


def _parse_text_row(path: str, lineno: int, tokens: list[str], dim: int) -> tuple[str, np.ndarray]:
    word = tokens[0]
    values = tokens[1:]
    if dim and len(values) != dim:
        raise EmbeddingFormatError(
            f"{path}: line {lineno}: expected {dim} values for {word!r}, found {len(values)}"
        )
    if not values:
        raise EmbeddingFormatError(f"{path}: line {lineno}: no vector values")
    try:
        vec = np.array([float(v) for v in values], dtype=np.float64)
    except ValueError:
        raise EmbeddingFormatError(
            f"{path}: line {lineno}: non-numeric vector component"
        ) from None
    if not np.all(np.isfinite(vec)):
        raise EmbeddingFormatError(f"{path}: line {lineno}: non-finite value for {word!r}")
    return word, vec


def _parse_binary(path: str) -> tuple[list[tuple[str, np.ndarray]], int]:
    with open(path, "rb") as handle:
        data = handle.read()
    newline = data.find(b"\n")
    if newline < 0:
        raise EmbeddingFormatError(f"{path}: missing header line")
    try:
        count_str, dim_str = data[:newline].decode("ascii").split()
        count, dim = int(count_str), int(dim_str)
    except ValueError:
        raise EmbeddingFormatError(f"{path}: malformed header {data[:newline]!r}") from None
    if count < 0 or dim <= 0:
        raise EmbeddingFormatError(f"{path}: malformed header {data[:newline]!r}")
    pairs: list[tuple[str, np.ndarray]] = []
    offset = newline + 1
    vec_bytes = 4 * dim
    for _ in range(count):
        space = data.find(b" ", offset)
        if space < 0:
            raise EmbeddingFormatError(f"{path}: byte {offset}: unterminated word")
        word = data[offset:space].decode("utf-8")
        start = space + 1
        end = start + vec_bytes
        if end > len(data):
            raise EmbeddingFormatError(
                f"{path}: byte {start}: truncated vector for {word!r}"
            )
        vec = np.frombuffer(data[start:end], dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(vec)):
            raise EmbeddingFormatError(f"{path}: byte {start}: non-finite value for {word!r}")
        pairs.append((word, vec))
        offset = end
    return pairs, dim


def load_embeddings(path: str, format: str = "text", lowercase: bool = False,
                    source_id: str | None = None) -> EmbeddingTable:
    """Load an embedding table from ``path`` in the given format.

    Duplicate words keep their first occurrence; the number dropped is
    recorded on the table and logged.  ``lowercase`` folds words at load
    time (off by default; pre-trained files are stored verbatim).
    """
    if format == "text":
        pairs, dim = _parse_text(path)
    elif format == "binary":
        pairs, dim = _parse_binary(path)
    else:
        raise ValueError(f"unknown embedding format {format!r}")
    if not pairs:
        raise EmbeddingFormatError(f"{path}: no embedding rows")
    return _build_table(pairs, dim, source_id if source_id is not None else path, lowercase)


def write_embeddings(table: EmbeddingTable, path: str, format: str = "text") -> None:
    """Write ``table`` in the requested format (companion to load_embeddings)."""
    if format == "text":
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(f"{len(table)} {table.dim}\n")
            for word, vec in table.items():
                handle.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")
    elif format == "binary":
        with open(path, "wb") as handle:
            handle.write(f"{len(table)} {table.dim}\n".encode("ascii"))
            for word, vec in table.items():
                handle.write(word.encode("utf-8") + b" ")
                handle.write(struct.pack(f"<{table.dim}f", *vec.astype(np.float32)))
    else:
        raise ValueError(f"unknown embedding format {format!r}")


def normalize_unit(table: EmbeddingTable) -> EmbeddingTable:
    """Scale every vector to unit L2 norm."""
    norms = np.linalg.norm(table.vectors, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"cannot normalize zero vector for word {table.words[zero[0]]!r}")
    return EmbeddingTable(
        dim=table.dim,
        words=table.words,
        vectors=table.vectors / norms[:, None],
        normalized=True,
        source_id=table.source_id,
        duplicates_dropped=table.duplicates_dropped,
    )


def scale_by_global_std(table: EmbeddingTable, factor: float) -> EmbeddingTable:
    """Multiply every cell by factor / sigma, sigma the population std of all cells."""
    if len(table) == 0:
        raise ValueError("cannot scale an empty table")
    sigma = float(table.vectors.std())
    if sigma == 0.0:
        raise ValueError("global standard deviation is zero (all-constant matrix)")
    return EmbeddingTable(
        dim=table.dim,
        words=table.words,
        vectors=table.vectors * (factor / sigma),
        normalized=False,
        source_id=table.source_id,
        duplicates_dropped=table.duplicates_dropped,
    )


def vocab_intersection(tables: Sequence[EmbeddingTable]) -> set[str]:
    """Words present in every table."""
    if not tables:
        raise ValueError("at least one table is required")
    common = tables[0].vocab()
    for table in tables[1:]:
        common &= table.vocab()
    return common
