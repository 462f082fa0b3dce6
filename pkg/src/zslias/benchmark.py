"""The planted synthetic benchmark: 10 seen / 4 unseen classes, 8 informative + 8 noise attributes."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .avae import AvaeHyper
from . import bilinear
from .bilinear import BilinearHyper
from .dataset import synth_generate
from .ias import SEED_OFFSETS, IasHyper, PipelineConfig, evaluate_bilinear, run_pipeline


@dataclass(frozen=True)
class SynthParams:
    n_classes_seen: int = 10
    n_classes_unseen: int = 4
    n_informative: int = 8
    n_noise: int = 8
    samples_per_class: int = 100
    d: int = 32
    noise_sigma: float = 1.0


DEFAULT_SYNTH = SynthParams()


def benchmark_config(seed: int, max_select: int | None = 8, epsilon: float = 0.0) -> PipelineConfig:
    """Pipeline settings for the synthetic benchmark (likelihood noise matched to the planted sigma)."""
    return PipelineConfig(
        seed=seed,
        avae=AvaeHyper(z_dim=16, hidden=128, recon_sigma=DEFAULT_SYNTH.noise_sigma, lr=3e-3,
                       epochs=300, batch=64, sample_likelihood=True),
        bilinear=BilinearHyper(alpha=3.0, lr=0.01, epochs=500),
        ias=IasHyper(alpha=0.1, lr=1e-3, inner_epochs=1, epsilon=epsilon, max_select=max_select),
    )


def make_benchmark(seed: int, params: SynthParams = DEFAULT_SYNTH):
    """Seen, unseen, attributes, split and planted ground truth for one master seed."""
    p = params
    return synth_generate(p.n_classes_seen, p.n_classes_unseen, p.n_informative, p.n_noise,
                          p.samples_per_class, p.d, p.noise_sigma, seed + SEED_OFFSETS["synth"],
                          return_info=True)


def with_budget(cfg: PipelineConfig, max_select: int) -> PipelineConfig:
    return replace(cfg, ias=replace(cfg.ias, max_select=max_select))


def budget_sweep(seen, unseen, a, split, cfg: PipelineConfig, budgets) -> dict:
    """Unseen-class accuracy of the retrained bilinear model for each selection budget.

    Greedy selection never looks ahead, so the run at budget k commits the first k
    picks of the run at the largest budget. One selection run therefore serves every
    budget; only the final retrain is repeated. A budget equal to N_a is the
    all-attribute baseline.
    """
    budgets = sorted(set(int(b) for b in budgets))
    report, arts = run_pipeline(seen, unseen, a, split, with_budget(cfg, budgets[-1]), return_artifacts=True)
    order = report["selected_indices"]
    _, bil_h, _ = cfg.seeded()
    seen_c, unseen_c = list(split.seen_classes), list(split.unseen_classes)
    acc = {}
    for k in budgets:
        mask = np.zeros(a.n_attributes)
        mask[order[:k]] = 1.0
        if mask.all():
            acc[k] = report["baseline_accuracy"]
            continue
        model = bilinear.train(seen, a, mask, bil_h, candidates=seen_c)
        acc[k] = evaluate_bilinear(model, unseen, a, mask, unseen_c)[1]
    return {"accuracy": acc, "order": order, "report": report}
