"""Codeword distances, nearest-codeword decoding and the error bounds built on them.

Predicted attribute codewords are decoded to the closest class signature in
Hamming distance. With tau the minimum pairwise distance between signatures,
any misdecoded sample sits at distance >= tau/2 from its true signature, which
gives the error-rate bound 2 * N_a * mean_loss / tau.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class BoundReport:
    n_attributes: int
    tau: int
    mean_loss: float
    generalization_bound: float
    empirical_error: float
    per_attribute_loss: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _as_bits(a, name="codeword") -> np.ndarray:
    a = np.asarray(a)
    if a.size and not np.all((a == 0) | (a == 1)):
        raise ValidationError(f"{name} must be binary")
    return a.astype(np.int8)


def attribute_distance(a_i, a_j) -> int:
    a_i, a_j = _as_bits(a_i), _as_bits(a_j)
    if a_i.shape != a_j.shape or a_i.ndim != 1:
        raise ValidationError(f"codeword lengths differ: {a_i.shape} vs {a_j.shape}")
    return int(np.count_nonzero(a_i != a_j))


def pairwise_distances(a_bin) -> np.ndarray:
    a = _as_bits(a_bin, "attribute matrix").astype(np.int64)
    return (a[:, None, :] != a[None, :, :]).sum(axis=2)


def min_attribute_distance(a_bin) -> int:
    """tau: smallest Hamming distance between two distinct class rows."""
    a = _as_bits(a_bin, "attribute matrix")
    if a.ndim != 2 or a.shape[0] < 2:
        raise ValidationError("tau needs at least 2 class signatures")
    dist = pairwise_distances(a)
    iu = np.triu_indices(a.shape[0], k=1)
    tau = int(dist[iu].min())
    if tau == 0:
        i, j = (int(t[np.argmin(dist[iu])]) for t in iu)
        raise ValidationError(f"duplicate signatures for classes {i} and {j}: tau = 0, bound undefined")
    return tau


def decode_nearest(codeword, a_bin) -> int:
    """Row index of the nearest signature; ties go to the lowest index."""
    c = _as_bits(codeword)
    a = _as_bits(a_bin, "attribute matrix")
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValidationError("empty candidate set")
    if c.shape != (a.shape[1],):
        raise ValidationError(f"codeword length {c.shape} does not match {a.shape[1]} attributes")
    return int(np.argmin((a != c[None, :]).sum(axis=1)))


def decode_all(codewords, a_bin) -> np.ndarray:
    c = _as_bits(codewords)
    a = _as_bits(a_bin, "attribute matrix")
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValidationError("empty candidate set")
    if c.ndim != 2 or c.shape[1] != a.shape[1]:
        raise ValidationError(f"codewords {c.shape} do not match {a.shape[1]} attributes")
    dist = (c[:, None, :] != a[None, :, :]).sum(axis=2)
    return np.argmin(dist, axis=1)


def check_error_correcting(pred_codewords, true_labels, a_bin) -> list:
    """Return every misdecoded sample whose codeword lies closer than tau/2 to its truth.

    The list is empty by construction; it exists so the property is checked on real
    outputs. Entries are (sample index, distance to true signature, tau).
    """
    c = _as_bits(pred_codewords)
    y = np.asarray(true_labels, dtype=np.int64)
    a = _as_bits(a_bin, "attribute matrix")
    tau = min_attribute_distance(a)
    pred = decode_all(c, a)
    violations = []
    for n in np.flatnonzero(pred != y):
        dist = attribute_distance(c[n], a[y[n]])
        if 2 * dist < tau:
            violations.append((int(n), dist, tau))
    return violations


def generalization_bound(n_attributes: int, tau: int, mean_loss: float) -> float:
    if tau < 1:
        raise ValidationError("tau must be >= 1; the bound is undefined for tau = 0")
    if not 0.0 <= mean_loss <= 1.0:
        raise ValidationError(f"mean_loss {mean_loss} outside [0,1]")
    return 2.0 * n_attributes * mean_loss / tau


def empirical_attribute_loss(pred_codewords, true_labels, a_bin):
    """Per-attribute 0/1 loss against the true class signature, and its mean."""
    c = _as_bits(pred_codewords)
    y = np.asarray(true_labels, dtype=np.int64)
    a = _as_bits(a_bin, "attribute matrix")
    if c.ndim != 2 or c.shape[0] != y.shape[0] or c.shape[1] != a.shape[1]:
        raise ValidationError(f"inconsistent shapes: codewords {c.shape}, labels {y.shape}, attributes {a.shape}")
    if c.shape[0] < 1:
        raise ValidationError("need at least one sample")
    per = (c != a[y]).mean(axis=0)
    return per, float(per.mean())


def bound_report(pred_codewords, true_labels, a_bin) -> BoundReport:
    """Bound and decoder error evaluated on the same sample set.

    `true_labels` index rows of `a_bin`, which should hold only the candidate classes.
    """
    a = _as_bits(a_bin, "attribute matrix")
    y = np.asarray(true_labels, dtype=np.int64)
    tau = min_attribute_distance(a)
    per, mean = empirical_attribute_loss(pred_codewords, y, a)
    err = float(np.mean(decode_all(pred_codewords, a) != y))
    return BoundReport(
        n_attributes=int(a.shape[1]),
        tau=tau,
        mean_loss=mean,
        generalization_bound=generalization_bound(a.shape[1], tau, mean),
        empirical_error=err,
        per_attribute_loss=[float(v) for v in per],
    )


def pac_bound(n_attributes: int, k_a: int, delta: float, d: int) -> float:
    """Sample-complexity bound, up to a constant (constant 1, natural log).

    (N_a / k_a) * [4 ln(2/delta) + 8 (d+1) ln(13 N_a / k_a)]
    """
    if k_a < 1 or k_a > n_attributes:
        raise ValidationError(f"k_a must lie in [1, n_attributes], got {k_a}")
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie in (0, 1)")
    if d < 1:
        raise ValidationError("d must be >= 1")
    r = n_attributes / k_a
    return r * (4.0 * math.log(2.0 / delta) + 8.0 * (d + 1) * math.log(13.0 * r))


def test_error_bound(train_error: float, n_train: int, pac_d: float, eta: float) -> float:
    """Upper bound on test error holding with probability 1 - eta."""
    if not 0.0 <= train_error <= 1.0:
        raise ValidationError("train_error must lie in [0, 1]")
    if n_train < 1:
        raise ValidationError("n_train must be >= 1")
    if not 0.0 < eta < 1.0:
        raise ValidationError("eta must lie in (0, 1)")
    if not 0.0 < pac_d < 2.0 * n_train:
        raise ValidationError(f"pac_d must lie in (0, 2*n_train), got {pac_d}")
    inner = pac_d * (math.log(2.0 * n_train / pac_d) + 1.0) - math.log(eta / 4.0)
    return train_error + math.sqrt(inner / n_train)


test_error_bound.__test__ = False  # keep pytest from collecting it
