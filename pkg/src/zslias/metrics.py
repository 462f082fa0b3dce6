"""Per-class accuracy, confusion matrices and distances between sample sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

VAR_FLOOR = 1e-8


def per_class_accuracy(preds, labels) -> float:
    """Mean over classes of within-class top-1 accuracy."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValidationError(f"{preds.size} predictions for {labels.size} labels")
    classes = np.unique(labels)
    if classes.size == 0:
        raise ValidationError("empty class: no labels given")
    return float(np.mean([np.mean(preds[labels == c] == c) for c in classes]))


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray
    class_names: tuple

    @property
    def percent(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def to_csv(self, percent: bool = False) -> str:
        m = self.percent if percent else self.counts
        lines = [",".join(["true\\pred"] + list(self.class_names))]
        for name, row in zip(self.class_names, m):
            cells = [repr(float(v)) for v in row] if percent else [str(int(v)) for v in row]
            lines.append(",".join([name] + cells))
        return "\n".join(lines) + "\n"


def confusion(preds, labels, n_classes: int, class_names=None) -> ConfusionMatrix:
    """Rows are true classes, columns predictions; indices must lie in [0, n_classes)."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    for name, v in (("label", labels), ("prediction", preds)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise ValidationError(f"{name} out of range [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    names = tuple(class_names) if class_names is not None else tuple(str(i) for i in range(n_classes))
    return ConfusionMatrix(counts, names)


def _check_sets(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValidationError("empty sample set")
    if x.shape[1] != y.shape[1]:
        raise ValidationError(f"dimension mismatch {x.shape[1]} vs {y.shape[1]}")
    return x, y


def wasserstein_1d(u, v) -> float:
    """W1 between two 1-D empirical distributions via their quantile functions."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    v = np.sort(np.asarray(v, dtype=np.float64))
    if u.size == v.size:
        return float(np.mean(np.abs(u - v)))
    # unequal sizes: integrate |F_u^-1 - F_v^-1| over the merged quantile grid
    qu = np.arange(1, u.size + 1) / u.size
    qv = np.arange(1, v.size + 1) / v.size
    grid = np.union1d(qu, qv)
    widths = np.diff(np.concatenate([[0.0], grid]))
    iu = np.minimum(np.searchsorted(qu, grid - 1e-12, side="left"), u.size - 1)
    iv = np.minimum(np.searchsorted(qv, grid - 1e-12, side="left"), v.size - 1)
    return float(np.sum(widths * np.abs(u[iu] - v[iv])))


def sliced_wasserstein(x, y, n_projections: int = 64, seed: int = 0) -> float:
    """Mean 1-D Wasserstein-1 distance over random unit directions."""
    if n_projections < 1:
        raise ValidationError("n_projections must be >= 1")
    x, y = _check_sets(x, y)
    dirs = np.random.default_rng(seed).normal(size=(n_projections, x.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    px, py = x @ dirs.T, y @ dirs.T
    return float(np.mean([wasserstein_1d(px[:, k], py[:, k]) for k in range(n_projections)]))


def _diag_gaussian(x):
    return x.mean(axis=0), np.maximum(x.var(axis=0), VAR_FLOOR)


def gaussian_divergences(x, y) -> dict:
    """KL, Hellinger and Bhattacharyya between diagonal Gaussians fitted to each set."""
    x, y = _check_sets(x, y)
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ValidationError("need at least 2 samples per set")
    m1, v1 = _diag_gaussian(x)
    m2, v2 = _diag_gaussian(y)
    kl = 0.5 * np.sum(v1 / v2 + (m2 - m1) ** 2 / v2 - 1.0 + np.log(v2 / v1))
    vm = 0.5 * (v1 + v2)
    bd = 0.125 * np.sum((m1 - m2) ** 2 / vm) + 0.5 * np.sum(np.log(vm / np.sqrt(v1 * v2)))
    bd = max(float(bd), 0.0)
    return {"kl": max(float(kl), 0.0), "hellinger": float(np.sqrt(-np.expm1(-bd))), "bhattacharyya": bd}


def distribution_distances(x, y, n_projections: int = 64, seed: int = 0) -> dict:
    out = {"wasserstein": sliced_wasserstein(x, y, n_projections, seed)}
    out.update(gaussian_divergences(x, y))
    return out
