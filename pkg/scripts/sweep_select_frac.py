"""Accuracy on unseen classes as a function of the selection budget (fraction of attributes).

    python3 scripts/sweep_select_frac.py --seeds 0 1 2 --out runs/sweep.csv
"""
import argparse
import math
from pathlib import Path

from zslias.benchmark import DEFAULT_SYNTH, benchmark_config, budget_sweep, make_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.2, 0.4, 0.8, 1.0])
    ap.add_argument("--out", help="CSV with seed,fraction,budget,accuracy")
    args = ap.parse_args()

    n_attr = DEFAULT_SYNTH.n_informative + DEFAULT_SYNTH.n_noise
    budgets = {f: max(1, math.ceil(f * n_attr - 1e-9)) for f in args.fractions}
    lines = ["seed,fraction,budget,accuracy"]
    for seed in args.seeds:
        seen, unseen, attrs, split, _ = make_benchmark(seed)
        acc = budget_sweep(seen, unseen, attrs, split, benchmark_config(seed), budgets.values())["accuracy"]
        for f, b in budgets.items():
            lines.append(f"{seed},{f!r},{b},{acc[b]!r}")
        print(f"seed {seed}: " + "  ".join(f"{f:.0%}={acc[b]:.3f}" for f, b in budgets.items()), flush=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
