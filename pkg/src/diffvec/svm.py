"""Soft-margin SVM training: linear one-vs-rest multiclass and binary RBF.

The linear classifier optimizes the exact hinge-loss objective
(1/2)||w||^2 + C * sum max(0, 1 - y (w.x + b)) per class through dual
coordinate descent, with the bias folded into a constant feature.  The
binary kernel classifier solves the standard box-constrained dual with a
maximal-violating-pair working-set strategy; pair selection is by gradient
value, not index, so row order does not affect the solution.  Models
serialize to versioned JSON.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import Prng

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


@dataclass
class LinearModel:
    """One-vs-rest linear classifier: per-class weights and bias."""

    classes: list[str]
    weights: np.ndarray  # (n_classes, dim)
    biases: np.ndarray  # (n_classes,)
    C: float
    objective_history: list[list[float]] = field(default_factory=list, repr=False)

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return x @ self.weights.T + self.biases[None, :]

    def predict(self, x: np.ndarray) -> list[str]:
        scores = self.decision(x)
        return [self.classes[i] for i in np.argmax(scores, axis=1)]

    def to_dict(self) -> dict:
        return {
            "model_format_version": MODEL_FORMAT_VERSION,
            "model_type": "linear_multiclass",
            "classes": self.classes,
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "hyperparameters": {"C": self.C},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        if data.get("model_type") != "linear_multiclass":
            raise ValueError(f"not a linear_multiclass model: {data.get('model_type')!r}")
        return cls(
            classes=list(data["classes"]),
            weights=np.asarray(data["weights"], dtype=np.float64),
            biases=np.asarray(data["biases"], dtype=np.float64),
            C=float(data["hyperparameters"]["C"]),
        )


@dataclass
class KernelModel:
    """Binary RBF SVM in dual form: support vectors and coefficients."""

    support_vectors: np.ndarray  # (n_sv, dim)
    dual_coef: np.ndarray  # (n_sv,) alpha_i * y_i
    alphas: np.ndarray  # (n_sv,)
    sv_labels: np.ndarray  # (n_sv,) +1 / -1
    bias: float
    gamma: float
    C: float

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        sq = (
            np.sum(x * x, axis=1)[:, None]
            + np.sum(self.support_vectors * self.support_vectors, axis=1)[None, :]
            - 2.0 * (x @ self.support_vectors.T)
        )
        k = np.exp(-self.gamma * np.maximum(sq, 0.0))
        return k @ self.dual_coef + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.decision(x) >= 0.0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "model_format_version": MODEL_FORMAT_VERSION,
            "model_type": "binary_rbf",
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "alphas": self.alphas.tolist(),
            "sv_labels": self.sv_labels.tolist(),
            "bias": self.bias,
            "hyperparameters": {"C": self.C, "gamma": self.gamma},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelModel":
        if data.get("model_type") != "binary_rbf":
            raise ValueError(f"not a binary_rbf model: {data.get('model_type')!r}")
        return cls(
            support_vectors=np.asarray(data["support_vectors"], dtype=np.float64),
            dual_coef=np.asarray(data["dual_coef"], dtype=np.float64),
            alphas=np.asarray(data["alphas"], dtype=np.float64),
            sv_labels=np.asarray(data["sv_labels"], dtype=np.float64),
            bias=float(data["bias"]),
            gamma=float(data["hyperparameters"]["gamma"]),
            C=float(data["hyperparameters"]["C"]),
        )


def save_model(model: LinearModel | KernelModel, path: str) -> None:
    payload = json.dumps(model.to_dict(), indent=2, sort_keys=True, allow_nan=False)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path: str) -> LinearModel | KernelModel:
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    kind = data.get("model_type")
    if kind == "linear_multiclass":
        return LinearModel.from_dict(data)
    if kind == "binary_rbf":
        return KernelModel.from_dict(data)
    raise ValueError(f"unknown model_type {kind!r} in {path}")


def _dcd_binary(x_aug: np.ndarray, y: np.ndarray, C: float, rng: np.random.Generator,
                tol: float, max_epochs: int) -> tuple[np.ndarray, list[float]]:
    """Dual coordinate descent for one binary hinge-loss problem.

    Returns the augmented weight vector and the per-epoch history of the
    dual objective 0.5 w.w - sum(alpha) (non-increasing by construction).
    Convergence is declared when the relative primal-dual gap, always
    evaluated over the full data, falls below ``tol``.  Coordinates whose
    projected gradient proves them bounded are shrunk from the sweep and
    periodically restored, which only affects speed, not the gap check.
    """
    n = x_aug.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(x_aug.shape[1])
    q_diag = np.einsum("ij,ij->i", x_aug, x_aug)
    q_diag[q_diag == 0.0] = 1.0
    history: list[float] = []
    active = np.arange(n)
    pg_max_prev = np.inf
    pg_min_prev = -np.inf
    for _ in range(max_epochs):
        pg_max = -np.inf
        pg_min = np.inf
        kept: list[int] = []
        for i in rng.permutation(active):
            gradient = y[i] * (w @ x_aug[i]) - 1.0
            old = alpha[i]
            if old == 0.0:
                if gradient > pg_max_prev:
                    continue  # provably stays at the lower bound; shrink
                projected = min(gradient, 0.0)
            elif old == C:
                if gradient < pg_min_prev:
                    continue
                projected = max(gradient, 0.0)
            else:
                projected = gradient
            kept.append(i)
            pg_max = max(pg_max, projected)
            pg_min = min(pg_min, projected)
            if projected != 0.0:
                new = min(max(old - gradient / q_diag[i], 0.0), C)
                if new != old:
                    w += (new - old) * y[i] * x_aug[i]
                    alpha[i] = new
        margins = 1.0 - y * (x_aug @ w)
        primal = 0.5 * (w @ w) + C * np.sum(np.maximum(margins, 0.0))
        dual = 0.5 * (w @ w) - alpha.sum()
        history.append(float(dual))
        if primal - (-dual) <= tol * max(1.0, abs(primal)):
            break
        if len(kept) == 0 or pg_max - pg_min <= tol:
            # inner problem converged without closing the gap: unshrink
            active = np.arange(n)
            pg_max_prev = np.inf
            pg_min_prev = -np.inf
        else:
            active = np.array(kept, dtype=np.int64)
            pg_max_prev = pg_max if pg_max > 0 else np.inf
            pg_min_prev = pg_min if pg_min < 0 else -np.inf
    else:
        log.warning("linear solver hit max_epochs=%d before reaching gap tolerance", max_epochs)
    return w, history


def train_linear_multiclass(x: np.ndarray, y: Sequence[str], C: float = 1.0,
                            seed: int = 0, tol: float = 1e-4,
                            max_epochs: int = 1000) -> LinearModel:
    """One-vs-rest linear SVM over string-labeled instances."""
    if C <= 0:
        raise ValueError("C must be positive")
    x = np.asarray(x, dtype=np.float64)
    labels = list(y)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ValueError("training data must contain at least two classes")
    if x.shape[0] != len(labels):
        raise ValueError("feature matrix and labels disagree on instance count")
    x_aug = np.hstack([x, np.ones((x.shape[0], 1))])
    weights = np.zeros((len(classes), x.shape[1]))
    biases = np.zeros(len(classes))
    histories: list[list[float]] = []
    base = Prng(seed)
    for c_index, cls in enumerate(classes):
        y_bin = np.where(np.asarray(labels) == cls, 1.0, -1.0)
        rng = base.split(f"ovr-{cls}").generator
        w_aug, history = _dcd_binary(x_aug, y_bin, C, rng, tol, max_epochs)
        weights[c_index] = w_aug[:-1]
        biases[c_index] = w_aug[-1]
        histories.append(history)
    return LinearModel(classes=classes, weights=weights, biases=biases, C=C,
                       objective_history=histories)


def train_binary_rbf(x: np.ndarray, y: Sequence[int] | np.ndarray, C: float,
                     gamma: float, seed: int = 0, tol: float = 1e-3,
                     max_iter: int | None = None) -> KernelModel:
    """Binary soft-margin RBF SVM via maximal-violating-pair SMO.

    ``y`` must be +1/-1 with both classes present.  The pair equality
    constraint sum(alpha_i y_i) = 0 is preserved exactly by every update;
    the box 0 <= alpha <= C is enforced by step clipping.  ``seed`` is
    accepted for signature symmetry; the solver itself is deterministic.
    """
    del seed  # pair selection is by gradient value, no randomness needed
    if C <= 0 or gamma <= 0:
        raise ValueError("C and gamma must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("labels must contain both +1 and -1")
    # canonical row order: ties in the pair-selection gradients then resolve
    # identically no matter how the caller ordered the data
    canonical = np.lexsort(tuple(x[:, d] for d in range(x.shape[1] - 1, -1, -1)) + (y,))
    x = x[canonical]
    y = y[canonical]
    n = x.shape[0]
    sq = np.sum(x * x, axis=1)
    kernel = np.exp(-gamma * np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0))
    alpha = np.zeros(n)
    # g_i = 1 - y_i * u_i is the dual gradient; F_i = y_i g_i drives selection
    g = np.ones(n)
    upper = np.where(y > 0, C, 0.0)  # bounds on y_i alpha_i
    lower = np.where(y > 0, 0.0, -C)
    if max_iter is None:
        max_iter = max(10_000, 200 * n)
    for iteration in range(max_iter):
        ya = y * alpha
        f = y * g
        up_mask = ya < upper
        low_mask = ya > lower
        f_up = np.where(up_mask, f, -np.inf)
        f_low = np.where(low_mask, f, np.inf)
        i = int(np.argmax(f_up))
        j = int(np.argmin(f_low))
        if f_up[i] <= f_low[j] + tol:
            break
        quad = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        quad = max(quad, 1e-12)
        lam = min(upper[i] - ya[i], ya[j] - lower[j], (f_up[i] - f_low[j]) / quad)
        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        g += lam * y * (kernel[j] - kernel[i])
    else:
        log.warning("SMO hit max_iter=%d before reaching KKT tolerance %g", max_iter, tol)
    # bias from free support vectors, else the midpoint of the violating bounds
    f = y * g
    free = (alpha > 1e-12 * C) & (alpha < C * (1.0 - 1e-12))
    if np.any(free):
        bias = float(np.mean(f[free]))
    else:
        ya = y * alpha
        f_up = np.where(ya < upper, f, -np.inf)
        f_low = np.where(ya > lower, f, np.inf)
        bias = float((np.max(f_up) + np.min(f_low)) / 2.0)
    sv = alpha > 1e-12 * C
    return KernelModel(
        support_vectors=x[sv].copy(),
        dual_coef=(alpha * y)[sv],
        alphas=alpha[sv],
        sv_labels=y[sv],
        bias=bias,
        gamma=gamma,
        C=C,
    )


def stratified_folds(labels: Sequence[str], folds: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified fold assignment; returns one index array per fold."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    labels = list(labels)
    if folds > len(labels):
        raise ValueError(f"cannot make {folds} folds from {len(labels)} instances")
    rng = Prng(seed).split("folds").generator
    by_class: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        by_class.setdefault(label, []).append(i)
    assignments: list[list[int]] = [[] for _ in range(folds)]
    cursor = 0
    for label in sorted(by_class):
        indices = by_class[label]
        if len(indices) < folds:
            log.info("class %r has %d < %d instances; folded best-effort", label,
                     len(indices), folds)
        order = rng.permutation(len(indices))
        for pos in order:
            assignments[cursor % folds].append(indices[pos])
            cursor += 1
    return [np.array(sorted(fold), dtype=np.int64) for fold in assignments]


@dataclass
class CVResult:
    per_class: dict[str, dict[str, float]]
    micro_average: dict[str, float]
    pooled: dict[str, dict[str, int]]
    folds: int


def prf_from_counts(tp: int, fp: int, fn: int) -> dict[str, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def cross_validate(x: np.ndarray, labels: Sequence[str], folds: int,
                   trainer: Callable[[np.ndarray, Sequence[str]], object],
                   seed: int = 0) -> CVResult:
    """Stratified k-fold estimate with per-class and micro-averaged P/R/F.

    Counts are pooled over folds (micro pooling of TP/FP/FN per class);
    the micro average pools decisions across classes as well.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = list(labels)
    fold_indices = stratified_folds(labels, folds, seed)
    counts = {cls: {"tp": 0, "fp": 0, "fn": 0} for cls in sorted(set(labels))}
    for f, test_idx in enumerate(fold_indices):
        if not test_idx.size:
            continue
        test_mask = np.zeros(len(labels), dtype=bool)
        test_mask[test_idx] = True
        train_idx = np.flatnonzero(~test_mask)
        model = trainer(x[train_idx], [labels[i] for i in train_idx])
        predictions = model.predict(x[test_idx])
        for idx, predicted in zip(test_idx, predictions):
            actual = labels[idx]
            if predicted == actual:
                counts[actual]["tp"] += 1
            else:
                counts[actual]["fn"] += 1
                if predicted in counts:
                    counts[predicted]["fp"] += 1
    per_class = {cls: prf_from_counts(**c) for cls, c in counts.items()}
    total = {key: sum(c[key] for c in counts.values()) for key in ("tp", "fp", "fn")}
    micro = prf_from_counts(**total)
    return CVResult(per_class=per_class, micro_average=micro, pooled=counts, folds=folds)
