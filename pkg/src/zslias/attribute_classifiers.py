"""One logistic-regression classifier per attribute, trained on seen classes."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .ecoc_bounds import decode_all, decode_nearest
from .errors import NumericalError, ValidationError

log = logging.getLogger(__name__)


def fingerprint(data: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.features).tobytes())
    h.update(np.ascontiguousarray(data.labels).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class AttrClassifierBank:
    weights: np.ndarray          # N_a x (d + 1); last column is the bias
    attr_names: tuple = ()
    trained_on: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] < 2:
            raise ValidationError(f"bank weights must be N_a x (d+1), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NumericalError("bank weights are not finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        names = tuple(self.attr_names) or tuple(f"attr{j:02d}" for j in range(w.shape[0]))
        object.__setattr__(self, "attr_names", names)

    @property
    def n_attributes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1

    def logits(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValidationError(f"feature dimension {x.shape[-1]} does not match bank dimension {self.dim}")
        return x @ self.weights[:, :-1].T + self.weights[:, -1]

    def subset(self, attr_idx) -> "AttrClassifierBank":
        idx = list(attr_idx)
        return AttrClassifierBank(self.weights[idx], tuple(self.attr_names[i] for i in idx), self.trained_on)


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def logistic_loss_grad(w, xb, t, l2):
    """Mean logistic loss plus (l2/2)||w||^2 for a stack of classifiers.

    w: (M, p) weights, xb: (N, p) inputs with a trailing ones column, t: (N, M) targets in {0,1}.
    Returns per-classifier losses (M,) and gradients (M, p).
    """
    z = xb @ w.T
    # log(1 + exp(z)) - t z, computed stably
    loss = (np.logaddexp(0.0, z) - t * z).mean(axis=0) + 0.5 * l2 * (w ** 2).sum(axis=1)
    grad = (_sigmoid(z) - t).T @ xb / xb.shape[0] + l2 * w
    return loss, grad


def train_bank(seen: Dataset, a_bin, epochs: int = 300, lr: float = 0.5, l2: float = 1e-3,
               seed: int = 0, attr_names=()) -> AttrClassifierBank:
    """Full-batch gradient descent per attribute, targets = binarized signature of each sample's class.

    Inputs are standardized for conditioning and the learned weights are folded back
    so the bank acts on raw features.
    """
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    a = np.asarray(a_bin)
    if seen.labels.max() >= a.shape[0]:
        raise ValidationError("a seen label has no binarized signature")
    t = a[seen.labels].astype(np.float64)
    n_attr = a.shape[1]
    for m in np.flatnonzero(np.ptp(t, axis=0) == 0):
        log.warning("attribute %d has a single label value on the training set; classifier will be constant", m)

    mu = seen.features.mean(axis=0)
    sd = seen.features.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (seen.features - mu) / sd
    xb = np.hstack([xs, np.ones((seen.n, 1))])

    p = xb.shape[1]
    w = np.vstack([np.random.default_rng(seed + m).normal(0.0, 0.01, size=p) for m in range(n_attr)])
    for ep in range(epochs):
        loss, grad = logistic_loss_grad(w, xb, t, l2)
        if not np.all(np.isfinite(loss)):
            raise NumericalError(f"attribute_classifiers: non-finite loss at epoch {ep}")
        w = w - lr * grad

    w_raw = w[:, :-1] / sd
    b_raw = w[:, -1] - w_raw @ mu
    return AttrClassifierBank(np.hstack([w_raw, b_raw[:, None]]), tuple(attr_names), fingerprint(seen))


def predict_codeword(bank: AttrClassifierBank, x) -> np.ndarray:
    """Bit m is 1 iff sigmoid(w_m . x + b_m) > 0.5, i.e. the logit is strictly positive."""
    return (bank.logits(x) > 0).astype(np.int8)


def dap_predict(bank: AttrClassifierBank, x, a_bin_unseen, candidates=None):
    """Nearest-signature decode of the predicted codeword(s).

    Returns a row index of `a_bin_unseen`, or the matching entry of `candidates` when given.
    Accepts one feature vector or a matrix of them.
    """
    x = np.asarray(x, dtype=np.float64)
    code = predict_codeword(bank, x)
    if x.ndim == 1:
        idx = decode_nearest(code, a_bin_unseen)
        return int(candidates[idx]) if candidates is not None else idx
    idx = decode_all(code, a_bin_unseen)
    return np.asarray(candidates)[idx] if candidates is not None else idx


def save_bank(path, bank: AttrClassifierBank) -> None:
    lines = [",".join([name] + [repr(float(v)) for v in row]) for name, row in zip(bank.attr_names, bank.weights)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_bank(path) -> AttrClassifierBank:
    names, rows = [], []
    for i, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        if not ln.strip():
            continue
        toks = ln.split(",")
        names.append(toks[0])
        try:
            rows.append([float(t) for t in toks[1:]])
        except ValueError:
            raise ValidationError(f"{path} line {i}: unparsable weight") from None
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: rows have differing widths")
    return AttrClassifierBank(np.array(rows), tuple(names))
