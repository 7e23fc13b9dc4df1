"""Count-based embeddings: smoothed positive PMI plus truncated SVD.

The pipeline is: tokenize and frequency-filter a plain-text corpus, count
symmetric-window co-occurrences (a blank line resets the window so contexts
never cross document boundaries), weight the counts into a shifted,
context-distribution-smoothed PPMI matrix, and factorize it with a
truncated SVD whose singular values can be fractionally weighted before
forming the word vectors.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .embeddings import EmbeddingTable
from .linalg import sym_eig

log = logging.getLogger(__name__)


@dataclass
class CooccurrenceCounts:
    vocab: list[str]
    pair_counts: dict[tuple[int, int], int]
    word_totals: np.ndarray
    context_totals: np.ndarray
    total: int
    window: int

    def validate(self) -> None:
        assert self.total == sum(self.pair_counts.values())
        by_word = np.zeros(len(self.vocab), dtype=np.int64)
        by_context = np.zeros(len(self.vocab), dtype=np.int64)
        for (i, j), count in self.pair_counts.items():
            by_word[i] += count
            by_context[j] += count
        assert np.array_equal(by_word, self.word_totals)
        assert np.array_equal(by_context, self.context_totals)


def _is_textual(token: str) -> bool:
    return any(ch.isalnum() for ch in token)


def preprocess_corpus(text: str | Iterable[str], min_count: int) -> tuple[list[list[str]], dict[str, int]]:
    """Lowercase, drop non-textual tokens, and apply a frequency threshold.

    ``text`` is either a whole corpus string or an iterable of lines; a
    blank line separates segments (documents).  Words occurring fewer than
    ``min_count`` times are removed from both the vocabulary and the token
    stream.  Returns (segments, vocabulary frequencies).
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    segments: list[list[str]] = []
    current: list[str] = []
    for line in lines:
        tokens = [t.lower() for t in line.split() if _is_textual(t)]
        if not tokens:
            if current:
                segments.append(current)
                current = []
            continue
        current.extend(tokens)
    if current:
        segments.append(current)
    freqs = Counter(t for seg in segments for t in seg)
    vocab = {w: c for w, c in freqs.items() if c >= min_count}
    filtered = [[t for t in seg if t in vocab] for seg in segments]
    filtered = [seg for seg in filtered if seg]
    if not filtered:
        raise ValueError("corpus is empty after preprocessing")
    return filtered, vocab


def build_cooccurrence(segments: list[list[str]], window: int,
                       vocab: Iterable[str] | None = None) -> CooccurrenceCounts:
    """Symmetric-window co-occurrence counts over pre-filtered segments.

    Every ordered pair of positions (i, j) with 0 < |i - j| <= window inside
    one segment contributes 1 to (word_i, word_j).  ``vocab`` fixes the row
    order; by default words are ordered by first occurrence.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if vocab is None:
        order: dict[str, int] = {}
        for seg in segments:
            for tok in seg:
                if tok not in order:
                    order[tok] = len(order)
    else:
        order = {w: i for i, w in enumerate(vocab)}
    pair_counts: Counter[tuple[int, int]] = Counter()
    for seg in segments:
        ids = [order[t] for t in seg if t in order]
        n = len(ids)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if i != j:
                    pair_counts[(ids[i], ids[j])] += 1
    word_totals = np.zeros(len(order), dtype=np.int64)
    context_totals = np.zeros(len(order), dtype=np.int64)
    for (i, j), count in pair_counts.items():
        word_totals[i] += count
        context_totals[j] += count
    return CooccurrenceCounts(
        vocab=list(order),
        pair_counts=dict(pair_counts),
        word_totals=word_totals,
        context_totals=context_totals,
        total=int(sum(pair_counts.values())),
        window=window,
    )


def compute_ppmi(counts: CooccurrenceCounts, cds: float = 0.75, shift: int = 1) -> sp.csr_matrix:
    """Shifted, smoothed positive PMI matrix.

    cell(w, c) = max(log[ p(w,c) / (p(w) * p_cds(c)) ] - log(shift), 0)
    where p_cds(c) raises the context counts to the ``cds`` power before
    normalizing.  Zero-count cells stay zero.
    """
    if not 0.0 < cds <= 1.0:
        raise ValueError("cds must be in (0, 1]")
    if shift < 1:
        raise ValueError("shift must be >= 1")
    n = len(counts.vocab)
    total = float(counts.total)
    if total == 0:
        return sp.csr_matrix((n, n))
    p_word = counts.word_totals / total
    smoothed = counts.context_totals.astype(np.float64) ** cds
    p_context = smoothed / smoothed.sum()
    rows, cols, vals = [], [], []
    log_shift = np.log(shift)
    for (i, j), count in counts.pair_counts.items():
        joint = count / total
        value = np.log(joint / (p_word[i] * p_context[j])) - log_shift
        if value > 0.0:
            rows.append(i)
            cols.append(j)
            vals.append(value)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def truncated_svd(matrix, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading left singular vectors and singular values of ``matrix``.

    Computed through the eigendecomposition of the smaller Gram matrix.
    Singular values come back non-increasing; directions beyond the
    numerical rank are returned as zero columns with a warning.
    """
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=np.float64)
    n, c = dense.shape
    if not 1 <= dim <= min(n, c):
        raise ValueError(f"dim={dim} out of range for a {n}x{c} matrix")
    if n <= c:
        gram = dense @ dense.T
        eigvals, eigvecs = sym_eig(gram)
        order = np.argsort(eigvals, kind="stable")[::-1][:dim]
        sigma = np.sqrt(np.maximum(eigvals[order], 0.0))
        u = eigvecs[:, order].copy()
    else:
        gram = dense.T @ dense
        eigvals, eigvecs = sym_eig(gram)
        order = np.argsort(eigvals, kind="stable")[::-1][:dim]
        sigma = np.sqrt(np.maximum(eigvals[order], 0.0))
        u = np.zeros((n, dim))
        for idx, s in enumerate(sigma):
            if s > 0.0:
                u[:, idx] = dense @ eigvecs[:, order[idx]] / s
    # columns below numerical rank are zeroed rather than left arbitrary
    tol = np.finfo(np.float64).eps * max(n, c) * (sigma[0] if sigma.size else 0.0)
    deficient = sigma <= tol
    if np.any(deficient):
        log.warning("requested dim %d exceeds numerical rank %d; trailing directions zeroed",
                    dim, int(np.sum(~deficient)))
        sigma = np.where(deficient, 0.0, sigma)
        u[:, deficient] = 0.0
    # deterministic sign: largest-magnitude component of each column positive
    for idx in range(u.shape[1]):
        col = u[:, idx]
        if col.any():
            pivot = int(np.argmax(np.abs(col)))
            if col[pivot] < 0:
                u[:, idx] = -col
    return u, sigma


def truncated_svd_embed(matrix, vocab: list[str], dim: int, eig_weight: float = 0.5,
                        source_id: str = "svd") -> EmbeddingTable:
    """Word vectors U_d * S_d^eig_weight, rows aligned with ``vocab``."""
    if not 0.0 <= eig_weight <= 1.0:
        raise ValueError("eig_weight must be in [0, 1]")
    shape = matrix.shape
    if shape[0] != len(vocab):
        raise ValueError(f"matrix has {shape[0]} rows but vocab has {len(vocab)} words")
    u, sigma = truncated_svd(matrix, dim)
    weights = np.ones_like(sigma) if eig_weight == 0.0 else sigma ** eig_weight
    vectors = u * weights[None, :]
    return EmbeddingTable(dim=dim, words=tuple(vocab), vectors=vectors, source_id=source_id)
