"""Greedy iterative attribute selection on generated unseen-class data, and the full pipeline."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import avae as avae_mod
from . import bilinear
from .attribute_classifiers import dap_predict, predict_codeword, train_bank
from .dataset import AttributeMatrix, Dataset, SplitSpec, binarize_attributes
from .ecoc_bounds import bound_report
from .errors import ValidationError
from .metrics import confusion, distribution_distances, per_class_accuracy

log = logging.getLogger(__name__)

# offsets added to the master seed for each randomized stage
SEED_OFFSETS = {"synth": 0, "avae": 1, "generate": 2, "ias": 3, "bilinear": 4, "bank": 5, "distances": 6}


@dataclass(frozen=True)
class IasHyper:
    alpha: float = 0.1
    lr: float = 1e-3
    inner_epochs: int = 1
    epsilon: float = 1e-4
    max_select: int | None = None   # None -> ceil(0.2 * N_a)
    r_mode: str = "uniform"
    seed: int = 0
    warm_start: bool = True


@dataclass
class SelectionVector:
    mask: np.ndarray
    order: list

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.int8)
        if int(self.mask.sum()) != len(self.order) or len(set(self.order)) != len(self.order):
            raise ValidationError("selection mask and order disagree")
        if any(self.mask[i] != 1 for i in self.order):
            raise ValidationError("selection mask and order disagree")

    def names(self, attrs: AttributeMatrix) -> list:
        return [attrs.attr_names[i] for i in self.order]


@dataclass
class IasRecord:
    t: int
    chosen_attribute: int
    loss_after: float
    accuracy_on_generated: float


@dataclass
class IasTrace:
    records: list = field(default_factory=list)
    initial_loss: float = float("nan")
    candidate_evaluations: int = 0
    stop_reason: str = ""

    def to_csv(self, attrs: AttributeMatrix) -> str:
        lines = ["t,attribute_name,loss,gen_accuracy"]
        for r in self.records:
            lines.append(f"{r.t},{attrs.attr_names[r.chosen_attribute]},{r.loss_after!r},{r.accuracy_on_generated!r}")
        return "\n".join(lines) + "\n"


def default_budget(n_attr: int, frac: float = 0.2) -> int:
    return max(1, min(n_attr, math.ceil(frac * n_attr - 1e-9)))


def select_attributes(generated: Dataset, a, hyper: IasHyper = IasHyper(), w_init=None,
                      candidates=None, threads: int = 1):
    """Grow a selection mask one attribute at a time.

    Each iteration takes `inner_epochs` gradient steps on W under the current mask,
    scores every single-bit extension of the mask with that W, and commits the
    cheapest one (lowest index on ties). Stops when the committed loss moves by at
    most `epsilon`, when `max_select` attributes are chosen, or when none remain.
    `w_init` replaces the seeded random starting W.
    """
    av = a.values if isinstance(a, AttributeMatrix) else np.asarray(a, dtype=np.float64)
    n_attr = av.shape[1]
    budget = default_budget(n_attr) if hyper.max_select is None else hyper.max_select
    if budget < 1 or budget > n_attr:
        raise ValidationError(f"max_select must lie in [1, {n_attr}], got {budget}")
    if hyper.epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    if hyper.inner_epochs < 0:
        raise ValidationError("inner_epochs must be >= 0")
    cand_classes = generated.classes() if candidates is None else candidates

    w0 = bilinear.init_w(generated.dim, n_attr, hyper.seed) if w_init is None else np.array(w_init, dtype=np.float64)
    if w0.shape != (generated.dim, n_attr):
        raise ValidationError(f"initial W has shape {w0.shape}, expected {(generated.dim, n_attr)}")
    model = bilinear.BilinearModel(w0.copy(), hyper.alpha, hyper.lr, hyper.inner_epochs)

    def loss_of(mask):
        return bilinear.objective(generated, model, av, mask, hyper.r_mode, cand_classes)

    s = np.zeros(n_attr)
    order: list[int] = []
    trace = IasTrace()
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for t in range(n_attr):
            if not hyper.warm_start:
                model.w = w0.copy()
            loss_t = loss_of(s)
            if t == 0:
                trace.initial_loss = loss_t
            for _ in range(hyper.inner_epochs):
                model.w = model.w - hyper.lr * bilinear.grad_w(generated, model, av, s, hyper.r_mode, cand_classes)

            free = [j for j in range(n_attr) if s[j] == 0]
            masks = []
            for j in free:
                m = s.copy()
                m[j] = 1.0
                masks.append(m)
            losses = list(pool.map(loss_of, masks)) if pool else [loss_of(m) for m in masks]
            trace.candidate_evaluations += len(free)

            k = int(np.argmin(losses))
            best = free[k]
            prev = s.copy()
            s[best] = 1.0
            order.append(best)
            assert s.sum() == t + 1 and np.count_nonzero(s - prev) == 1

            preds = bilinear.predict(generated.features, model, av, s, cand_classes)
            trace.records.append(IasRecord(t + 1, best, float(losses[k]),
                                           per_class_accuracy(preds, generated.labels)))
            log.debug("ias t=%d picked %d loss %.6g", t + 1, best, losses[k])

            if abs(losses[k] - loss_t) <= hyper.epsilon:
                trace.stop_reason = "converged"
                break
            if len(order) >= budget:
                trace.stop_reason = "budget"
                break
        else:
            trace.stop_reason = "exhausted"
        if not trace.stop_reason:
            trace.stop_reason = "exhausted"
    finally:
        if pool:
            pool.shutdown()
    return SelectionVector(s.astype(np.int8), order), trace


# -- end-to-end -------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    avae: avae_mod.AvaeHyper = avae_mod.AvaeHyper()
    bilinear: bilinear.BilinearHyper = bilinear.BilinearHyper()
    ias: IasHyper = IasHyper()
    bank_epochs: int = 300
    bank_lr: float = 0.5
    bank_l2: float = 1e-3
    n_per_class: int = 100
    n_projections: int = 64
    threads: int = 1
    ias_init: str = "ridge"        # ridge | baseline | random
    init_ridge: float = 0.1
    init_scale: float = 0.1

    def seeded(self):
        """Per-stage hyperparameters with seeds fanned out from the master seed."""
        from dataclasses import replace
        return (replace(self.avae, seed=self.seed + SEED_OFFSETS["avae"]),
                replace(self.bilinear, seed=self.seed + SEED_OFFSETS["bilinear"]),
                replace(self.ias, seed=self.seed + SEED_OFFSETS["ias"]))

    def to_dict(self) -> dict:
        return asdict(self)


def _bound_dict(codes, labels_local, a_bin_cand):
    try:
        return asdict(bound_report(codes, labels_local, a_bin_cand))
    except ValidationError as e:
        return {"undefined": str(e)}


def evaluate_bilinear(model, data: Dataset, a: AttributeMatrix, s, candidates):
    preds = bilinear.predict(data.features, model, a, s, candidates)
    return preds, per_class_accuracy(preds, data.labels)


def run_pipeline(seen: Dataset, unseen: Dataset, a: AttributeMatrix, split: SplitSpec,
                 cfg: PipelineConfig = PipelineConfig(), return_artifacts: bool = False):
    """Train the AVAE, generate unseen-class data, select attributes on it, retrain and evaluate.

    The report compares the all-attribute baseline with the selected subset for both
    the bilinear model and the per-attribute codeword decoder, with bound reports for
    each and distances between the generated, seen and unseen feature sets.
    """
    avae_h, bil_h, ias_h = cfg.seeded()
    seen_c, unseen_c = list(split.seen_classes), list(split.unseen_classes)
    n_attr = a.n_attributes

    gen_model = avae_mod.train_avae(seen, a, avae_h)
    gen = avae_mod.generate(gen_model, a.values[unseen_c], cfg.n_per_class,
                            cfg.seed + SEED_OFFSETS["generate"], class_ids=unseen_c,
                            sample_likelihood=avae_h.sample_likelihood)

    ones = np.ones(n_attr)
    baseline = bilinear.train(seen, a, ones, bil_h, candidates=seen_c)
    if cfg.ias_init == "ridge":
        w_init = bilinear.ridge_init(seen, a, cfg.init_ridge, cfg.init_scale)
    elif cfg.ias_init == "baseline":
        w_init = cfg.init_scale * baseline.w
    elif cfg.ias_init == "random":
        w_init = None
    else:
        raise ValidationError(f"unknown ias_init {cfg.ias_init!r}")
    sel, trace = select_attributes(gen, a, ias_h, w_init=w_init, candidates=unseen_c, threads=cfg.threads)

    if sel.mask.all():
        ias_model = baseline
    else:
        ias_model = bilinear.train(seen, a, sel.mask, bil_h, candidates=seen_c)

    base_pred, base_acc = evaluate_bilinear(baseline, unseen, a, ones, unseen_c)
    ias_pred, ias_acc = evaluate_bilinear(ias_model, unseen, a, sel.mask, unseen_c)

    a_bin = binarize_attributes(a)
    bank = train_bank(seen, a_bin, cfg.bank_epochs, cfg.bank_lr, cfg.bank_l2,
                      cfg.seed + SEED_OFFSETS["bank"], a.attr_names)
    codes = predict_codeword(bank, unseen.features)
    local = np.searchsorted(np.asarray(unseen_c), unseen.labels)
    a_bin_u = a_bin[unseen_c]
    chosen = sorted(sel.order)
    rest = [j for j in range(n_attr) if j not in set(chosen)]

    def dap_acc(cols):
        if not cols:
            return None
        pred = dap_predict(bank.subset(cols), unseen.features, a_bin_u[:, cols], candidates=unseen_c)
        return per_class_accuracy(pred, unseen.labels)

    dseed = cfg.seed + SEED_OFFSETS["distances"]
    distances = {
        "generated_vs_unseen": distribution_distances(gen.features, unseen.features, cfg.n_projections, dseed),
        "generated_vs_seen": distribution_distances(gen.features, seen.features, cfg.n_projections, dseed),
        "seen_vs_unseen": distribution_distances(seen.features, unseen.features, cfg.n_projections, dseed),
    }
    names_u = [a.class_names[c] for c in unseen_c]
    conf_base = confusion(np.searchsorted(unseen_c, base_pred), local, len(unseen_c), names_u)
    conf_ias = confusion(np.searchsorted(unseen_c, ias_pred), local, len(unseen_c), names_u)

    report = {
        "n_attributes": n_attr,
        "selected_attributes": sel.names(a),
        "selected_indices": list(sel.order),
        "stop_reason": trace.stop_reason,
        "candidate_evaluations": trace.candidate_evaluations,
        "baseline_accuracy": base_acc,
        "ias_accuracy": ias_acc,
        "dap_accuracy_all": dap_acc(list(range(n_attr))),
        "dap_accuracy_selected": dap_acc(chosen),
        "dap_accuracy_remaining": dap_acc(rest),
        "bound_all": _bound_dict(codes, local, a_bin_u),
        "bound_selected": _bound_dict(codes[:, chosen], local, a_bin_u[:, chosen]),
        "distances": distances,
        "ias_trace": [asdict(r) for r in trace.records],
        "avae_final_elbo": gen_model.elbo_trajectory[-1],
        "binarization": "per-attribute mean over all classes, strict >",
        "config": cfg.to_dict(),
    }
    if not return_artifacts:
        return report
    arts = dict(generated=gen, avae=gen_model, baseline=baseline, ias_model=ias_model, selection=sel,
                trace=trace, bank=bank, confusion_baseline=conf_base, confusion_ias=conf_ias)
    return report, arts
