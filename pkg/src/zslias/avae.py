"""Attribute-conditioned VAE used to synthesize features for unseen classes.

Encoder: [x, a] -> tanh hidden -> (mu, log sigma^2).  Decoder: [z, a] -> tanh hidden -> x_hat.
Prior N(0, I) regardless of the condition; Gaussian likelihood with fixed variance
recon_sigma^2; one reparameterized sample per data point.  Gradients are written out
by hand so they can be checked against finite differences.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import AttributeMatrix, Dataset
from .errors import NumericalError, ValidationError

PARAM_ORDER = ("enc_w", "enc_b", "mu_w", "mu_b", "lv_w", "lv_b", "dec_w", "dec_b", "out_w", "out_b")
LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class AvaeHyper:
    z_dim: int = 16
    hidden: int = 64
    recon_sigma: float = 0.1
    lr: float = 1e-3
    epochs: int = 100
    batch: int = 64
    seed: int = 0
    sample_likelihood: bool = False


@dataclass
class AvaeModel:
    params: dict
    d: int
    n_attr: int
    z_dim: int
    hidden: int
    recon_sigma: float
    elbo_trajectory: list = field(default_factory=list)

    def __post_init__(self):
        if self.z_dim < 1 or self.hidden < 1:
            raise ValidationError("z_dim and hidden must be >= 1")
        if self.recon_sigma <= 0:
            raise ValidationError("recon_sigma must be > 0")
        for k in PARAM_ORDER:
            if not np.all(np.isfinite(self.params[k])):
                raise NumericalError(f"avae parameter {k} is not finite")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_ORDER])

    def with_flat(self, v) -> "AvaeModel":
        out, i = {}, 0
        for k in PARAM_ORDER:
            shape = self.params[k].shape
            size = int(np.prod(shape))
            out[k] = np.asarray(v[i:i + size], dtype=np.float64).reshape(shape)
            i += size
        return AvaeModel(out, self.d, self.n_attr, self.z_dim, self.hidden, self.recon_sigma)


def init_model(d: int, n_attr: int, z_dim: int = 16, hidden: int = 64, recon_sigma: float = 0.1,
               rng=None) -> AvaeModel:
    if z_dim < 1 or hidden < 1:
        raise ValidationError("z_dim and hidden must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng

    def lin(fan_in, fan_out):
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)), np.zeros(fan_out)

    p = {}
    p["enc_w"], p["enc_b"] = lin(d + n_attr, hidden)
    p["mu_w"], p["mu_b"] = lin(hidden, z_dim)
    p["lv_w"], p["lv_b"] = lin(hidden, z_dim)
    p["lv_w"] *= 0.1
    p["dec_w"], p["dec_b"] = lin(z_dim + n_attr, hidden)
    p["out_w"], p["out_b"] = lin(hidden, d)
    return AvaeModel(p, d, n_attr, z_dim, hidden, recon_sigma)


def encode(model: AvaeModel, x, a):
    p = model.params
    h = np.tanh(np.hstack([x, a]) @ p["enc_w"] + p["enc_b"])
    return h @ p["mu_w"] + p["mu_b"], h @ p["lv_w"] + p["lv_b"]


def decode(model: AvaeModel, z, a) -> np.ndarray:
    p = model.params
    g = np.tanh(np.hstack([z, a]) @ p["dec_w"] + p["dec_b"])
    return g @ p["out_w"] + p["out_b"]


def _forward(model: AvaeModel, x, a, eps):
    p = model.params
    xa = np.hstack([x, a])
    h = np.tanh(xa @ p["enc_w"] + p["enc_b"])
    mu = h @ p["mu_w"] + p["mu_b"]
    lv = h @ p["lv_w"] + p["lv_b"]
    std = np.exp(0.5 * lv)
    z = mu + std * eps
    za = np.hstack([z, a])
    g = np.tanh(za @ p["dec_w"] + p["dec_b"])
    xh = g @ p["out_w"] + p["out_b"]
    kl = 0.5 * np.sum(np.exp(lv) + mu ** 2 - 1.0 - lv, axis=1)
    s2 = model.recon_sigma ** 2
    rec = -0.5 * np.sum((x - xh) ** 2, axis=1) / s2 - 0.5 * x.shape[1] * (LOG2PI + np.log(s2))
    cache = dict(xa=xa, h=h, mu=mu, lv=lv, std=std, eps=eps, za=za, g=g, xh=xh)
    return rec - kl, kl, rec, cache


def _check_batch(model, x, a, eps):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    if x.shape[1] != model.d or a.shape[1] != model.n_attr or eps.shape[1] != model.z_dim:
        raise ValidationError(f"avae input shapes x{x.shape} a{a.shape} noise{eps.shape} do not fit the model")
    if not (x.shape[0] == a.shape[0] == eps.shape[0]):
        raise ValidationError("x, a and noise must have the same number of rows")
    return x, a, eps


def elbo(x, a_y, model: AvaeModel, noise):
    """Single-sample ELBO: -KL(q(z|x,a) || N(0,I)) + log N(x; x_hat, recon_sigma^2 I).

    One vector in -> a float; matrices in -> one value per row.
    """
    single = np.asarray(x).ndim == 1
    x, a, eps = _check_batch(model, x, a_y, noise)
    val = _forward(model, x, a, eps)[0]
    if not np.all(np.isfinite(val)):
        raise NumericalError("avae: non-finite ELBO")
    return float(val[0]) if single else val


def elbo_terms(x, a_y, model: AvaeModel, noise):
    x, a, eps = _check_batch(model, x, a_y, noise)
    _, kl, rec, _ = _forward(model, x, a, eps)
    return kl, rec


def elbo_and_grad(model: AvaeModel, x, a, eps):
    """Mean ELBO over the rows and its gradient for every parameter."""
    x, a, eps = _check_batch(model, x, a, eps)
    p = model.params
    val, _, _, c = _forward(model, x, a, eps)
    b = x.shape[0]
    gr = {}
    dxh = (x - c["xh"]) / (model.recon_sigma ** 2 * b)
    gr["out_w"] = c["g"].T @ dxh
    gr["out_b"] = dxh.sum(axis=0)
    dv = (dxh @ p["out_w"].T) * (1.0 - c["g"] ** 2)
    gr["dec_w"] = c["za"].T @ dv
    gr["dec_b"] = dv.sum(axis=0)
    dz = (dv @ p["dec_w"].T)[:, :model.z_dim]
    dmu = dz - c["mu"] / b
    dlv = dz * c["eps"] * 0.5 * c["std"] - 0.5 * (np.exp(c["lv"]) - 1.0) / b
    gr["mu_w"] = c["h"].T @ dmu
    gr["mu_b"] = dmu.sum(axis=0)
    gr["lv_w"] = c["h"].T @ dlv
    gr["lv_b"] = dlv.sum(axis=0)
    du = (dmu @ p["mu_w"].T + dlv @ p["lv_w"].T) * (1.0 - c["h"] ** 2)
    gr["enc_w"] = c["xa"].T @ du
    gr["enc_b"] = du.sum(axis=0)
    return float(val.mean()), gr


def train_avae(seen: Dataset, a, hyper: AvaeHyper = AvaeHyper()) -> AvaeModel:
    """Mini-batch stochastic gradient ascent on the ELBO with Adam steps.

    Shuffling and reparameterization noise come from one generator seeded by
    `hyper.seed`. The returned model carries the per-epoch mean ELBO.
    """
    if hyper.epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if hyper.batch < 1:
        raise ValidationError("batch must be >= 1")
    av = a.values if isinstance(a, AttributeMatrix) else np.asarray(a, dtype=np.float64)
    rng = np.random.default_rng(hyper.seed)
    model = init_model(seen.dim, av.shape[1], hyper.z_dim, hyper.hidden, hyper.recon_sigma, rng)
    x_all, a_all = seen.features, av[seen.labels]
    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v2 = {k: np.zeros_like(v) for k, v in model.params.items()}
    b1, b2, tiny = 0.9, 0.999, 1e-8
    step = 0
    traj = []
    for ep in range(hyper.epochs):
        order = rng.permutation(seen.n)
        total = 0.0
        for lo in range(0, seen.n, hyper.batch):
            idx = order[lo:lo + hyper.batch]
            eps = rng.normal(size=(idx.size, model.z_dim))
            val, gr = elbo_and_grad(model, x_all[idx], a_all[idx], eps)
            if not np.isfinite(val):
                raise NumericalError(f"avae: non-finite ELBO at epoch {ep}")
            total += val * idx.size
            step += 1
            for k in PARAM_ORDER:
                m[k] = b1 * m[k] + (1 - b1) * gr[k]
                v2[k] = b2 * v2[k] + (1 - b2) * gr[k] ** 2
                mhat = m[k] / (1 - b1 ** step)
                vhat = v2[k] / (1 - b2 ** step)
                model.params[k] = model.params[k] + hyper.lr * mhat / (np.sqrt(vhat) + tiny)
        traj.append(total / seen.n)
    for k in PARAM_ORDER:
        if not np.all(np.isfinite(model.params[k])):
            raise NumericalError(f"avae: non-finite parameter {k} after training")
    model.elbo_trajectory = traj
    return model


def generate(model: AvaeModel, a_unseen, n_per_class: int, seed: int, class_ids=None,
             sample_likelihood: bool = False) -> Dataset:
    """Decode N(0, I) draws conditioned on each class row of `a_unseen`.

    `class_ids` labels the rows (defaults to 0..L-1). Each class uses its own generator
    derived from (seed, row) so classes can be produced independently.  With
    `sample_likelihood` the Gaussian observation noise is added to the decoded mean.
    """
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    av = a_unseen.values if isinstance(a_unseen, AttributeMatrix) else np.asarray(a_unseen, dtype=np.float64)
    av = np.atleast_2d(av)
    ids = np.arange(av.shape[0]) if class_ids is None else np.asarray(class_ids, dtype=np.int64)
    if ids.shape != (av.shape[0],):
        raise ValidationError("class_ids must match the rows of a_unseen")
    xs, ys = [], []
    for row, cid in enumerate(ids):
        rng = np.random.default_rng([seed, row])
        z = rng.normal(size=(n_per_class, model.z_dim))
        cond = np.repeat(av[row][None, :], n_per_class, axis=0)
        x = decode(model, z, cond)
        if sample_likelihood:
            x = x + model.recon_sigma * rng.normal(size=x.shape)
        xs.append(x)
        ys.append(np.full(n_per_class, cid))
    return Dataset(np.vstack(xs), np.concatenate(ys), "generated")


def save_model(dir_path, model: AvaeModel, hyper: AvaeHyper | None = None) -> None:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"d": model.d, "n_attr": model.n_attr, "z_dim": model.z_dim, "hidden": model.hidden,
            "recon_sigma": model.recon_sigma,
            "shapes": {k: list(model.params[k].shape) for k in PARAM_ORDER}}
    if hyper is not None:
        meta["hyper"] = asdict(hyper)
    (d / "avae_model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (d / "avae_params.csv").write_text("".join(repr(float(v)) + "\n" for v in model.flat()))


def load_model(dir_path) -> AvaeModel:
    d = Path(dir_path)
    for f in ("avae_model.json", "avae_params.csv"):
        if not (d / f).is_file():
            raise ValidationError(f"missing file {d / f}")
    meta = json.loads((d / "avae_model.json").read_text())
    flat = np.array([float(t) for t in (d / "avae_params.csv").read_text().split()])
    tmpl = {k: np.zeros(meta["shapes"][k]) for k in PARAM_ORDER}
    expected = sum(v.size for v in tmpl.values())
    if flat.size != expected:
        raise ValidationError(f"avae_params.csv holds {flat.size} values, expected {expected}")
    shell = AvaeModel(tmpl, meta["d"], meta["n_attr"], meta["z_dim"], meta["hidden"], meta["recon_sigma"])
    return shell.with_flat(flat)
