"""Deterministic numerical kernels: symmetric eigensolver, k-means, kernels, PRNG.

Everything here is a pure function of its inputs (plus an explicit seed), so
callers can parallelize across invocations and still get reproducible runs.
The eigensolver is a dense Householder tridiagonalization followed by
implicit-shift QL with accumulated eigenvectors; problem sizes in this
package stay below a few thousand rows, for which this is fast enough and
has no tuning knobs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 mixing function (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


class Prng:
    """Seeded random source with named substreams.

    The stream is numpy's PCG64 keyed by a SplitMix64-mixed 64-bit seed.
    ``split(tag)`` derives an independent child stream by hashing the tag
    (BLAKE2b, 8 bytes) into the seed, so the same (seed, tag) pair always
    yields the same stream regardless of platform or call order.
    """

    algorithm = "pcg64/splitmix64"

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.generator = np.random.Generator(np.random.PCG64(splitmix64(self.seed)))

    def split(self, tag: str) -> "Prng":
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        return Prng(self.seed ^ int.from_bytes(digest, "little"))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Prng(seed={self.seed})"


def check_symmetric(a: np.ndarray, rel_tol: float = 1e-12) -> None:
    """Raise if ``a`` is not square, finite, and elementwise symmetric.

    The tolerance is relative: |a[i,j] - a[j,i]| <= rel_tol * max(1, |a[i,j]|).
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    bound = rel_tol * np.maximum(1.0, np.abs(a))
    if not np.all(np.abs(a - a.T) <= bound):
        worst = np.unravel_index(np.argmax(np.abs(a - a.T)), a.shape)
        raise ValueError(f"matrix is not symmetric at index {worst}")


def _tridiagonalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Householder reduction A -> Q T Q^T.  Returns (diag, offdiag, Q)."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    reflectors: list[np.ndarray | None] = []
    for k in range(n - 2):
        x = a[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            reflectors.append(None)
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            reflectors.append(None)
            continue
        v /= vnorm
        block = a[k + 1:, k + 1:]
        w = block @ v
        # (I - 2vv')A(I - 2vv') = A - vu' - uv' with u = 2w - 2(v.w)v
        u = 2.0 * w - (2.0 * (v @ w)) * v
        block -= np.outer(v, u)
        block -= np.outer(u, v)
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        reflectors.append(v)
    q = np.eye(n)
    for k in range(n - 3, -1, -1):
        v = reflectors[k]
        if v is None:
            continue
        sub = q[k + 1:, k + 1:]
        sub -= 2.0 * np.outer(v, v @ sub)
    return np.diag(a).copy(), np.diag(a, 1).copy(), q


def _tql2(d: np.ndarray, e: np.ndarray, z: np.ndarray, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Implicit-shift QL on a tridiagonal matrix, rotations accumulated into z."""
    n = d.size
    d = d.copy()
    e = np.append(e, 0.0)
    z = np.asfortranarray(z)  # column rotations dominate; keep columns contiguous
    eps = np.finfo(np.float64).eps
    hypot = math.hypot
    for l in range(n):
        for sweep in range(max_sweeps + 1):
            m = l
            while m < n - 1:
                if abs(e[m]) <= eps * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            if sweep == max_sweeps:
                raise RuntimeError(f"QL iteration failed to converge at row {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i]
                zj = z[:, i + 1]
                rotated = c * zi - s * zj
                zj *= c
                zj += s * zi
                z[:, i] = rotated
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d, kind="stable")
    return d[order], np.ascontiguousarray(z[:, order])


def sym_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as columns in matching
    order).  Rejects matrices that are non-symmetric beyond the relative
    tolerance of :func:`check_symmetric`.
    """
    check_symmetric(a)
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if n == 1:
        return a[0].copy(), np.ones((1, 1))
    # exact symmetrization so rounding in the caller cannot bias the reduction
    a = (a + a.T) / 2.0
    d, e, q = _tridiagonalize(a)
    return _tql2(d, e, q)


@dataclass
class KMeansResult:
    assignment: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)
    restart_index: int = 0


def _sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = np.sum(x * x, axis=1)[:, None] + np.sum(c * c, axis=1)[None, :] - 2.0 * (x @ c.T)
    return np.maximum(d, 0.0)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = _sq_distances(x, centroids[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[j] = x[idx]
        d2 = np.minimum(d2, _sq_distances(x, centroids[j:j + 1]).ravel())
    return centroids


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int) -> KMeansResult:
    k = centroids.shape[0]
    labels = np.full(x.shape[0], -1)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_distances(x, centroids)
        new_labels = np.argmin(d2, axis=1)
        # an empty cluster is re-seeded at the point farthest from its own
        # centroid (smallest index on ties), then labels are recomputed
        reseeded = set()
        for c in range(k):
            if np.any(new_labels == c):
                continue
            own = d2[np.arange(x.shape[0]), new_labels].copy()
            own[list(reseeded)] = -np.inf
            far = int(np.argmax(own))
            centroids[c] = x[far]
            reseeded.add(far)
            d2 = _sq_distances(x, centroids)
            new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(x.shape[0]), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = x[labels == c]
            if members.size:
                centroids[c] = members.mean(axis=0)
    d2 = _sq_distances(x, centroids)
    inertia = float(d2[np.arange(x.shape[0]), labels].sum())
    return KMeansResult(labels, centroids, inertia, history)


def kmeans(points: Sequence[np.ndarray] | np.ndarray, k: int, restarts: int = 10,
           seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """k-means with k-means++ seeding and Lloyd iterations.

    Runs ``restarts`` independent initializations and keeps the result with
    the lowest inertia, ties resolved by restart index, so the outcome is
    independent of any parallel evaluation order.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must form a 2-d array")
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k={k} out of range for {x.shape[0]} points")
    base = Prng(seed)
    best: KMeansResult | None = None
    for r in range(max(1, restarts)):
        rng = base.split(f"kmeans-restart-{r}").generator
        init = _kmeans_pp_init(x, k, rng)
        result = _lloyd(x, init.copy(), max_iter)
        result.restart_index = r
        if best is None or (result.inertia, result.restart_index) < (best.inertia, best.restart_index):
            best = result
    assert best is not None
    return best


def kernel_rbf(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); equals 1.0 exactly when x == y."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("vectors must have equal dimensions")
    diff = x - y
    return float(np.exp(-gamma * float(diff @ diff)))


def kernel_cosine(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine of the angle between x and y, clipped to [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("vectors must have equal dimensions")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip((x @ y) / (nx * ny), -1.0, 1.0))


def cosine_affinity(cos: float) -> float:
    """Map a cosine in [-1, 1] to a non-negative affinity (1 + cos) / 2."""
    return (1.0 + cos) / 2.0
