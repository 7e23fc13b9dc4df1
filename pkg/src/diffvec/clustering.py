"""Spectral clustering of difference vectors and clustering-quality metrics.

The clustering is the row-normalized (Ng-Jordan-Weiss) variant: build a
pairwise affinity matrix, scale it symmetrically by inverse square-root
degrees, embed each point as its row in the top-k eigenvector matrix, unit
normalize the rows, and run k-means on them.  Quality is scored with the
V-Measure (harmonic mean of the entropy-based homogeneity and completeness)
and with a per-relation entropy normalized by log of the relation size.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .dataset import DiffVecInstance
from .linalg import Prng, kmeans, sym_eig

log = logging.getLogger(__name__)

_KMEANS_RESTARTS = 10


@dataclass(frozen=True)
class ClusterConfig:
    k: int
    measure: str = "rbf"
    gamma: float = 1.0
    subsample_cap: int = 4000
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.measure not in ("rbf", "cosine"):
            raise ValueError(f"unknown similarity measure {self.measure!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.subsample_cap < self.k:
            raise ValueError("subsample_cap must be >= k")


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    config: ClusterConfig

    def __post_init__(self):
        distinct = len(set(self.labels.tolist()))
        if distinct > self.config.k:
            raise ValueError(f"{distinct} distinct clusters exceeds k={self.config.k}")


def _pairwise_sq_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    d = np.maximum(d, 0.0)
    np.fill_diagonal(d, 0.0)
    return (d + d.T) / 2.0


def affinity_matrix(x: np.ndarray, measure: str, gamma: float) -> np.ndarray:
    """Symmetric affinity with exact unit diagonal."""
    if measure == "rbf":
        a = np.exp(-gamma * _pairwise_sq_distances(x))
    elif measure == "cosine":
        norms = np.linalg.norm(x, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ValueError(
                f"cosine affinity undefined: instance {int(zero[0])} has a zero vector"
            )
        unit = x / norms[:, None]
        cos = np.clip(unit @ unit.T, -1.0, 1.0)
        cos = (cos + cos.T) / 2.0
        a = (1.0 + cos) / 2.0
    else:
        raise ValueError(f"unknown similarity measure {measure!r}")
    np.fill_diagonal(a, 1.0)
    return a


def _spectral_embedding(a: np.ndarray, k: int) -> np.ndarray:
    degrees = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    m = a * inv_sqrt[:, None] * inv_sqrt[None, :]
    m = (m + m.T) / 2.0
    _, vectors = sym_eig(m)
    embedding = vectors[:, -k:]
    row_norms = np.linalg.norm(embedding, axis=1)
    row_norms[row_norms == 0.0] = 1.0
    return embedding / row_norms[:, None]


def cluster(instances: Sequence[DiffVecInstance], config: ClusterConfig) -> ClusterAssignment:
    """Assign every instance to one of ``config.k`` clusters.

    Inputs beyond ``subsample_cap`` are handled by clustering a seeded
    uniform subsample and giving each remaining point the cluster of its
    nearest subsampled neighbor in the original vector space.  A point
    whose off-diagonal affinity is exactly zero is disconnected from the
    graph; it is pre-assigned its own cluster and the rest are clustered
    with a correspondingly smaller k.
    """
    n = len(instances)
    if n < config.k:
        raise ValueError(f"need at least k={config.k} instances, got {n}")
    x = np.asarray([inst.vector for inst in instances], dtype=np.float64)
    rng = Prng(config.seed)
    if n > config.subsample_cap:
        sub_idx = np.sort(rng.split("subsample").generator.choice(
            n, size=config.subsample_cap, replace=False))
        sub_labels = _cluster_matrix(x[sub_idx], config, rng)
        labels = np.empty(n, dtype=np.int64)
        labels[sub_idx] = sub_labels
        rest = np.setdiff1d(np.arange(n), sub_idx)
        if rest.size:
            sub_x = x[sub_idx]
            sq = np.sum(sub_x * sub_x, axis=1)
            for i in rest:
                d = sq - 2.0 * (sub_x @ x[i])
                labels[i] = sub_labels[int(np.argmin(d))]
        log.info("clustered %d of %d instances; %d assigned by nearest neighbor",
                 config.subsample_cap, n, rest.size)
    else:
        labels = _cluster_matrix(x, config, rng)
    return ClusterAssignment(labels, config)


def _cluster_matrix(x: np.ndarray, config: ClusterConfig, rng: Prng) -> np.ndarray:
    n = x.shape[0]
    a = affinity_matrix(x, config.measure, config.gamma)
    off_degree = a.sum(axis=1) - np.diag(a)
    isolated = np.flatnonzero(off_degree == 0.0)
    labels = np.empty(n, dtype=np.int64)
    if isolated.size:
        log.warning("%d instance(s) have zero affinity to all others; "
                    "each becomes its own cluster", isolated.size)
    if isolated.size >= config.k:
        raise ValueError(
            f"{isolated.size} disconnected instances cannot fit in k={config.k} clusters"
        )
    for offset, idx in enumerate(isolated):
        labels[idx] = config.k - 1 - offset
    connected = np.setdiff1d(np.arange(n), isolated)
    k_rest = config.k - isolated.size
    if connected.size:
        if k_rest == 1:
            labels[connected] = 0
        else:
            sub = a[np.ix_(connected, connected)]
            embedding = _spectral_embedding(sub, k_rest)
            result = kmeans(embedding, k_rest, restarts=_KMEANS_RESTARTS,
                            seed=rng.split("spectral-kmeans").seed)
            labels[connected] = result.assignment
    return labels


def _entropy(counts: Counter) -> float:
    total = sum(counts.values())
    h = 0.0
    for c in counts.values():
        if c:
            p = c / total
            h -= p * math.log(p)
    return h


def v_measure(gold: Sequence, pred: Sequence) -> tuple[float, float, float]:
    """Homogeneity, completeness, and their harmonic mean.

    Entropies are maximum-likelihood estimates with natural logs.
    Homogeneity is 1 when the gold labels carry no entropy, and likewise
    completeness for the predicted clustering.
    """
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    if not gold:
        raise ValueError("empty labelings")
    n = len(gold)
    gold_counts = Counter(gold)
    pred_counts = Counter(pred)
    joint = Counter(zip(gold, pred))
    h_gold = _entropy(gold_counts)
    h_pred = _entropy(pred_counts)
    h_gold_given_pred = 0.0
    h_pred_given_gold = 0.0
    for (g, p), c in joint.items():
        h_gold_given_pred -= c / n * math.log(c / pred_counts[p])
        h_pred_given_gold -= c / n * math.log(c / gold_counts[g])
    homogeneity = 1.0 if h_gold == 0.0 else 1.0 - h_gold_given_pred / h_gold
    completeness = 1.0 if h_pred == 0.0 else 1.0 - h_pred_given_gold / h_pred
    # rounding in the entropy sums must not push scores outside [0, 1]
    homogeneity = min(1.0, max(0.0, homogeneity))
    completeness = min(1.0, max(0.0, completeness))
    if homogeneity + completeness == 0.0:
        v = 0.0
    else:
        v = 2.0 * homogeneity * completeness / (homogeneity + completeness)
    return homogeneity, completeness, v


def relation_entropy(gold: Sequence, pred: Sequence) -> dict:
    """Per-relation entropy over clusters, normalized by log relation size.

    A relation concentrated in one cluster scores 0; spread one-per-cluster
    scores 1.  Relations with a single instance score 0 by convention.
    """
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    by_relation: dict = {}
    for g, p in zip(gold, pred):
        by_relation.setdefault(g, Counter())[p] += 1
    result = {}
    for relation, counts in by_relation.items():
        n_r = sum(counts.values())
        value = 0.0 if n_r == 1 else _entropy(counts) / math.log(n_r)
        result[relation] = min(1.0, max(0.0, value))
    return result


_MEASURE_ORDER = {"rbf": 0, "cosine": 1}


def tune(dev_instances: Sequence[DiffVecInstance],
         grid: Sequence[ClusterConfig]) -> ClusterConfig:
    """Pick the grid config maximizing V-Measure on the dev instances.

    Ties break toward smaller k, then rbf before cosine, then smaller gamma.
    """
    if not grid:
        raise ValueError("empty configuration grid")
    gold = [inst.label for inst in dev_instances]
    scored = []
    for config in grid:
        assignment = cluster(dev_instances, config)
        _, _, v = v_measure(gold, assignment.labels.tolist())
        scored.append((-v, config.k, _MEASURE_ORDER[config.measure], config.gamma, config))
    scored.sort(key=lambda item: item[:4])
    best = scored[0][4]
    log.info("tuned config: k=%d measure=%s gamma=%g (dev V-Measure %.4f)",
             best.k, best.measure, best.gamma, -scored[0][0])
    return best


def sweep_k(instances: Sequence[DiffVecInstance], k_values: Sequence[int],
            base_config: ClusterConfig) -> dict[int, float]:
    """V-Measure for each cluster count, all other settings fixed."""
    gold = [inst.label for inst in instances]
    result: dict[int, float] = {}
    for k in k_values:
        config = replace(base_config, k=k)
        assignment = cluster(instances, config)
        _, _, v = v_measure(gold, assignment.labels.tolist())
        result[k] = v
    return result


def default_grid(k_values: Sequence[int], subsample_cap: int = 4000,
                 seed: int = 0) -> list[ClusterConfig]:
    """The tuning grid: rbf over a geometric gamma ladder, plus shifted cosine."""
    grid = []
    for k in k_values:
        for gamma in (0.25, 0.5, 1.0, 2.0, 4.0):
            grid.append(ClusterConfig(k=k, measure="rbf", gamma=gamma,
                                      subsample_cap=subsample_cap, seed=seed))
        grid.append(ClusterConfig(k=k, measure="cosine",
                                  subsample_cap=subsample_cap, seed=seed))
    return grid
