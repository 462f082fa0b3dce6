"""Bilinear compatibility model F(x, y) = x^T W (s * a_y) with a structured hinge loss.

The selection mask s zeroes attribute columns of the class embedding. The loss for a
sample is sum_y r_ny [1{y != y_n} + F(x_n, y) - F(x_n, y_n)]_+ over the candidate
classes, averaged over the batch; the regularizer is (alpha/4)||W||_F^2 so that its
gradient is (alpha/2) W.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import AttributeMatrix, Dataset
from .errors import NumericalError, ValidationError

R_MODES = ("uniform", "ale_rank")


@dataclass(frozen=True)
class BilinearHyper:
    alpha: float = 0.1
    lr: float = 0.01
    epochs: int = 500
    r_mode: str = "uniform"
    seed: int = 0


@dataclass
class BilinearModel:
    w: np.ndarray
    alpha: float = 0.0
    lr: float = 0.05
    epochs: int = 0
    loss_trajectory: list = field(default_factory=list)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if not np.all(np.isfinite(self.w)):
            raise NumericalError("W has non-finite entries")


def _values(a) -> np.ndarray:
    return a.values if isinstance(a, AttributeMatrix) else np.asarray(a, dtype=np.float64)


def _mask(s, n_attr) -> np.ndarray:
    if s is None:
        return np.ones(n_attr)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (n_attr,):
        raise ValidationError(f"selection length {s.shape} does not match {n_attr} attributes")
    if not np.all((s == 0) | (s == 1)):
        raise ValidationError("selection entries must be 0 or 1")
    return s


def score_matrix(x, model: BilinearModel, a, s=None) -> np.ndarray:
    """Scores for every (sample, class row) pair: X W (s * A)^T."""
    av = _values(a)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.w.shape[0] or av.shape[1] != model.w.shape[1]:
        raise ValidationError(
            f"dimension mismatch: x has {x.shape[1]} features, W is {model.w.shape}, A has {av.shape[1]} attributes")
    return (x @ model.w) @ (av * _mask(s, av.shape[1])).T


def score(x, y: int, model: BilinearModel, a, s=None) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("score takes a single feature vector")
    av = _values(a)
    return float(score_matrix(x, model, av[[y]], s)[0, 0])


def predict(x, model: BilinearModel, a, s, candidates):
    """Arg-max class among `candidates` (ties to the lowest class index).

    A single vector gives an int; a matrix gives an array of class indices.
    """
    cand = np.asarray(sorted(int(c) for c in candidates), dtype=np.int64)
    if cand.size == 0:
        raise ValidationError("empty candidate set")
    x = np.asarray(x, dtype=np.float64)
    sc = score_matrix(x, model, _values(a)[cand], s)
    out = cand[np.argmax(sc, axis=1)]
    return int(out[0]) if x.ndim == 1 else out


def _ale_weights(k: np.ndarray) -> np.ndarray:
    """l_k / k with l_k = sum_{i<=k} 1/i; weight 1 when no violation."""
    kmax = int(k.max()) if k.size else 0
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, kmax + 1))])
    return np.where(k > 0, harmonic[k] / np.maximum(k, 1), 1.0)


def _hinge_terms(batch: Dataset, model, a, s, r_mode, candidates):
    av = _values(a)
    cand = np.asarray(sorted(int(c) for c in (batch.classes() if candidates is None else candidates)),
                      dtype=np.int64)
    pos = np.searchsorted(cand, batch.labels)
    if np.any(pos >= cand.size) or np.any(cand[np.minimum(pos, cand.size - 1)] != batch.labels):
        raise ValidationError("batch labels fall outside the candidate classes")
    sc = score_matrix(batch.features, model, av[cand], s)
    rows = np.arange(batch.n)
    delta = np.ones_like(sc)
    delta[rows, pos] = 0.0
    margin = delta + sc - sc[rows, pos][:, None]
    active = margin > 0
    if r_mode == "uniform":
        r = np.ones(batch.n)
    elif r_mode == "ale_rank":
        r = _ale_weights(active.sum(axis=1))
    else:
        raise ValidationError(f"unknown r_mode {r_mode!r}")
    return av[cand], pos, margin, active, r


def hinge_loss(batch: Dataset, model: BilinearModel, a, s=None, r_mode: str = "uniform",
               candidates=None) -> float:
    """Mean per-sample ranking hinge; candidates default to the classes present in the batch."""
    _, _, margin, _, r = _hinge_terms(batch, model, a, s, r_mode, candidates)
    return float(np.mean(r * np.maximum(margin, 0.0).sum(axis=1)))


def regularizer(model: BilinearModel) -> float:
    return 0.25 * model.alpha * float(np.sum(model.w ** 2))


def objective(batch, model, a, s=None, r_mode="uniform", candidates=None) -> float:
    return hinge_loss(batch, model, a, s, r_mode, candidates) + regularizer(model)


def grad_w(batch: Dataset, model: BilinearModel, a, s=None, r_mode: str = "uniform",
           candidates=None) -> np.ndarray:
    """Subgradient of `objective` in W.

    Each active hinge (n, y) contributes r_ny * outer(x_n, s * (a_y - a_{y_n})).
    """
    ac, pos, _, active, r = _hinge_terms(batch, model, a, s, r_mode, candidates)
    coef = active.astype(np.float64) * r[:, None]
    rows = np.arange(batch.n)
    coef[rows, pos] -= coef.sum(axis=1)
    masked = ac * _mask(s, ac.shape[1])
    return batch.features.T @ (coef @ masked) / batch.n + 0.5 * model.alpha * model.w


def init_w(d: int, n_attr: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, 0.01 / np.sqrt(d), size=(d, n_attr))


def ridge_init(data: Dataset, a, lam: float = 0.1, scale: float = 0.1) -> np.ndarray:
    """Per-attribute ridge regressors of the signed attribute code (2a - 1) on features.

    Column m predicts attribute m on its own, so a column's contribution to the score
    reflects how well that one attribute can be read off the features. `scale` keeps the
    resulting scores small, leaving the hinge terms active.
    """
    if lam <= 0:
        raise ValidationError("ridge lam must be > 0")
    av = _values(a)
    x = data.features
    t = 2.0 * av[data.labels] - 1.0
    gram = x.T @ x / data.n + lam * np.eye(data.dim)
    return scale * np.linalg.solve(gram, x.T @ t / data.n)


def train(data: Dataset, a, s=None, hyper: BilinearHyper = BilinearHyper(), candidates=None,
          w0=None) -> BilinearModel:
    """Full-batch gradient descent from a seeded Gaussian start (or `w0`)."""
    if hyper.epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if hyper.r_mode not in R_MODES:
        raise ValidationError(f"unknown r_mode {hyper.r_mode!r}")
    av = _values(a)
    w = init_w(data.dim, av.shape[1], hyper.seed) if w0 is None else np.array(w0, dtype=np.float64)
    model = BilinearModel(w, hyper.alpha, hyper.lr, hyper.epochs)
    traj = []
    for ep in range(hyper.epochs):
        loss = objective(data, model, av, s, hyper.r_mode, candidates)
        if not np.isfinite(loss):
            raise NumericalError(f"bilinear: non-finite loss at epoch {ep}")
        traj.append(loss)
        with np.errstate(over="ignore", invalid="ignore"):
            model.w = model.w - hyper.lr * grad_w(data, model, av, s, hyper.r_mode, candidates)
        if not np.all(np.isfinite(model.w)):
            raise NumericalError(f"bilinear: non-finite W after epoch {ep}")
    final = objective(data, model, av, s, hyper.r_mode, candidates)
    if not np.isfinite(final):
        raise NumericalError(f"bilinear: non-finite loss at epoch {hyper.epochs}")
    traj.append(final)
    model.loss_trajectory = traj
    return model


def save_model(dir_path, model: BilinearModel, hyper: BilinearHyper | None = None) -> None:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    (d / "bilinear_w.csv").write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in model.w))
    meta = {"alpha": model.alpha, "lr": model.lr, "epochs": model.epochs,
            "shape": list(model.w.shape)}
    if hyper is not None:
        meta["hyper"] = asdict(hyper)
    (d / "bilinear_hyper.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_model(dir_path) -> BilinearModel:
    d = Path(dir_path)
    for f in ("bilinear_w.csv", "bilinear_hyper.json"):
        if not (d / f).is_file():
            raise ValidationError(f"missing file {d / f}")
    meta = json.loads((d / "bilinear_hyper.json").read_text())
    w = np.array([[float(t) for t in ln.split(",")]
                  for ln in (d / "bilinear_w.csv").read_text().splitlines() if ln.strip()])
    if list(w.shape) != meta["shape"]:
        raise ValidationError(f"W shape {w.shape} disagrees with sidecar {meta['shape']}")
    return BilinearModel(w, meta["alpha"], meta["lr"], meta["epochs"])
