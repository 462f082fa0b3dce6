"""Command-line front end: zslias <subcommand> [flags].

Exit codes: 0 success, 1 validation error (bad flags, bad inputs), 2 numerical failure.
Logging level comes from ZSLIAS_LOG (error, info or debug; default error).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import attribute_classifiers as bank_mod
from . import avae as avae_mod
from . import bilinear
from .benchmark import DEFAULT_SYNTH, SynthParams, benchmark_config
from .dataset import (AttributeMatrix, Dataset, SplitSpec, load_dataset, merge, read_attributes_csv,
                      save_dataset, split_by_role, synth_generate)
from .ecoc_bounds import bound_report
from .errors import NumericalError, ValidationError, ZslError
from .ias import SEED_OFFSETS, IasHyper, PipelineConfig, default_budget, run_pipeline, select_attributes
from .metrics import confusion, distribution_distances, per_class_accuracy

log = logging.getLogger("zslias")

SEED_HELP = ("The master --seed fans out to stage seeds by fixed offsets: "
             + ", ".join(f"{k} +{v}" for k, v in SEED_OFFSETS.items()) + ".")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- flag groups ------------------------------------------------------------

def _add_common(p, data_required=False):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    if data_required is not None:
        p.add_argument("--data", required=data_required, help="dataset directory")


def _add_bilinear(p, prefix=""):
    p.add_argument("--alpha", type=float, help="regularization strength (bilinear and IAS)")
    p.add_argument(f"--{prefix}lr", type=float, dest="lr", help="bilinear step size")
    p.add_argument(f"--{prefix}epochs", type=int, dest="epochs", help="bilinear full-batch epochs")
    p.add_argument("--r-mode", choices=["uniform", "ale-rank"], help="hinge weighting r_ny")


def _add_avae(p, prefix="avae-"):
    p.add_argument("--z-dim", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--recon-sigma", type=float)
    p.add_argument(f"--{prefix}lr", type=float, dest="avae_lr", help="AVAE Adam step size")
    p.add_argument(f"--{prefix}epochs", type=int, dest="avae_epochs", help="AVAE epochs")
    p.add_argument("--batch", type=int, help="AVAE minibatch size")
    p.add_argument("--sample-likelihood", action=argparse.BooleanOptionalAction, default=None,
                   help="add decoder observation noise when generating")


def _add_ias(p, lr_flag="--ias-lr"):
    p.add_argument(lr_flag, type=float, dest="ias_lr", help="IAS inner step size")
    p.add_argument("--inner-epochs", type=int)
    p.add_argument("--epsilon", type=float, help="stop when the committed loss moves by at most this")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--max-select", type=int, help="selection budget")
    g.add_argument("--select-frac", type=float, help="budget as ceil(frac * N_a)")
    p.add_argument("--ias-init", choices=["ridge", "baseline", "random"], help="starting W for selection")
    p.add_argument("--threads", type=int, default=1, help="workers for the candidate sweep")


def _pick(v, default):
    return default if v is None else v


def _r_mode(v):
    return None if v is None else v.replace("-", "_")


def _avae_hyper(args, base: avae_mod.AvaeHyper) -> avae_mod.AvaeHyper:
    return replace(base, z_dim=_pick(args.z_dim, base.z_dim), hidden=_pick(args.hidden, base.hidden),
                   recon_sigma=_pick(args.recon_sigma, base.recon_sigma), lr=_pick(args.avae_lr, base.lr),
                   epochs=_pick(args.avae_epochs, base.epochs), batch=_pick(args.batch, base.batch),
                   sample_likelihood=_pick(args.sample_likelihood, base.sample_likelihood))


def _bil_hyper(args, base: bilinear.BilinearHyper) -> bilinear.BilinearHyper:
    return replace(base, alpha=_pick(args.alpha, base.alpha), lr=_pick(args.lr, base.lr),
                   epochs=_pick(args.epochs, base.epochs), r_mode=_pick(_r_mode(args.r_mode), base.r_mode))


def _ias_hyper(args, base: IasHyper, n_attr: int) -> IasHyper:
    max_select = base.max_select
    if args.max_select is not None:
        max_select = args.max_select
    elif args.select_frac is not None:
        if not 0.0 < args.select_frac <= 1.0:
            raise ValidationError("--select-frac must lie in (0, 1]")
        max_select = default_budget(n_attr, args.select_frac)
    if max_select is None:
        max_select = default_budget(n_attr)
    return replace(base, alpha=_pick(args.alpha, base.alpha), lr=_pick(args.ias_lr, base.lr),
                   inner_epochs=_pick(args.inner_epochs, base.inner_epochs),
                   epsilon=_pick(args.epsilon, base.epsilon), max_select=max_select,
                   r_mode=_pick(_r_mode(args.r_mode), base.r_mode))


def _check_threads(n):
    if n < 1:
        raise ValidationError("--threads must be >= 1")
    return n


# -- output helpers -----------------------------------------------------------

def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _out_dir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_config(out: Path, args, resolved: dict) -> None:
    cfg = {"subcommand": args.cmd, "seed": args.seed, "seed_offsets": SEED_OFFSETS}
    cfg.update(resolved)
    _dump_json(out / "config.json", cfg)


def _seen_part(data: Dataset, split: SplitSpec) -> Dataset:
    seen, _ = split_by_role(data, split)
    if seen.n == 0:
        raise ValidationError("dataset has no samples of seen classes")
    return seen


def _unseen_part(data: Dataset, split: SplitSpec) -> Dataset:
    _, unseen = split_by_role(data, split)
    if unseen.n == 0:
        raise ValidationError("dataset has no samples of unseen classes")
    return unseen


def _read_selection(path, attrs: AttributeMatrix) -> np.ndarray:
    try:
        sel = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"missing file {path}") from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: {e}") from None
    mask = np.asarray(sel.get("mask", []), dtype=np.float64)
    if mask.shape != (attrs.n_attributes,):
        raise ValidationError(f"{path}: mask length {mask.size} does not match {attrs.n_attributes} attributes")
    return mask


def _selection_json(mask, order, attrs: AttributeMatrix) -> dict:
    return {"mask": [int(v) for v in mask], "order": [int(i) for i in order],
            "names": [attrs.attr_names[i] for i in order]}


# -- subcommands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    p = SynthParams(
        n_classes_seen=_pick(args.n_seen, DEFAULT_SYNTH.n_classes_seen),
        n_classes_unseen=_pick(args.n_unseen, DEFAULT_SYNTH.n_classes_unseen),
        n_informative=_pick(args.n_informative, DEFAULT_SYNTH.n_informative),
        n_noise=_pick(args.n_noise, DEFAULT_SYNTH.n_noise),
        samples_per_class=_pick(args.samples_per_class, DEFAULT_SYNTH.samples_per_class),
        d=_pick(args.dim, DEFAULT_SYNTH.d),
        noise_sigma=_pick(args.noise_sigma, DEFAULT_SYNTH.noise_sigma))
    seen, unseen, attrs, split, info = synth_generate(
        p.n_classes_seen, p.n_classes_unseen, p.n_informative, p.n_noise, p.samples_per_class, p.d,
        p.noise_sigma, args.seed + SEED_OFFSETS["synth"], return_info=True)
    out = _out_dir(args)
    save_dataset(out, merge(seen, unseen), attrs, split)
    _dump_json(out / "synth_info.json", {
        "informative": [attrs.attr_names[i] for i in info.informative],
        "informative_indices": list(info.informative),
        "noise": [attrs.attr_names[i] for i in info.noise]})
    _write_config(out, args, {"synth": asdict(p)})
    return 0


def cmd_train_avae(args) -> int:
    data, attrs, split = load_dataset(args.data)
    hyper = replace(_avae_hyper(args, avae_mod.AvaeHyper()), seed=args.seed + SEED_OFFSETS["avae"])
    model = avae_mod.train_avae(_seen_part(data, split), attrs, hyper)
    out = _out_dir(args)
    avae_mod.save_model(out, model, hyper)
    (out / "elbo_trajectory.csv").write_text("epoch,elbo\n" + "".join(
        f"{i + 1},{v!r}\n" for i, v in enumerate(model.elbo_trajectory)))
    _write_config(out, args, {"data": args.data, "avae": asdict(hyper)})
    return 0


def cmd_generate(args) -> int:
    _, attrs, split = load_dataset(args.data)
    model = avae_mod.load_model(args.model)
    if model.n_attr != attrs.n_attributes:
        raise ValidationError(f"model expects {model.n_attr} attributes, data has {attrs.n_attributes}")
    n_per = _pick(args.n_per_class, 100)
    sample_lik = _pick(args.sample_likelihood, False)
    uc = list(split.unseen_classes)
    gen = avae_mod.generate(model, attrs.values[uc], n_per, args.seed + SEED_OFFSETS["generate"],
                            class_ids=uc, sample_likelihood=sample_lik)
    out = _out_dir(args)
    save_dataset(out, gen, attrs, split, write_role=True)
    _write_config(out, args, {"data": args.data, "model": args.model, "n_per_class": n_per,
                              "sample_likelihood": sample_lik})
    return 0


def cmd_select(args) -> int:
    gen, attrs, split = load_dataset(args.generated)
    uc = list(split.unseen_classes)
    gen = gen.restrict(uc, "generated")
    if gen.n == 0:
        raise ValidationError("generated dataset has no samples of unseen classes")
    base = PipelineConfig().ias
    hyper = replace(_ias_hyper(args, base, attrs.n_attributes), seed=args.seed + SEED_OFFSETS["ias"])
    init = _pick(args.ias_init, "ridge")
    init_ridge, init_scale = PipelineConfig.init_ridge, PipelineConfig.init_scale
    if init == "random":
        w_init = None
    else:
        if args.data is None:
            raise ValidationError(f"--ias-init {init} needs --data with seen-class samples")
        data, attrs_d, split_d = load_dataset(args.data)
        if attrs_d.attr_names != attrs.attr_names:
            raise ValidationError("--data and --generated disagree on attribute names")
        seen = _seen_part(data, split_d)
        if init == "ridge":
            w_init = bilinear.ridge_init(seen, attrs, init_ridge, init_scale)
        else:
            bh = replace(bilinear.BilinearHyper(), seed=args.seed + SEED_OFFSETS["bilinear"])
            w_init = init_scale * bilinear.train(seen, attrs, None, bh, candidates=split_d.seen_classes).w
    sel, trace = select_attributes(gen, attrs, hyper, w_init=w_init, candidates=uc,
                                   threads=_check_threads(args.threads))
    out = _out_dir(args)
    _dump_json(out / "selection.json", dict(_selection_json(sel.mask, sel.order, attrs),
                                            stop_reason=trace.stop_reason,
                                            candidate_evaluations=trace.candidate_evaluations,
                                            initial_loss=trace.initial_loss))
    (out / "ias_trace.csv").write_text(trace.to_csv(attrs))
    _write_config(out, args, {"generated": args.generated, "data": args.data, "ias": asdict(hyper),
                              "ias_init": init, "init_ridge": init_ridge, "init_scale": init_scale,
                              "threads": args.threads})
    return 0


def cmd_train(args) -> int:
    data, attrs, split = load_dataset(args.data)
    hyper = replace(_bil_hyper(args, bilinear.BilinearHyper()), seed=args.seed + SEED_OFFSETS["bilinear"])
    mask = np.ones(attrs.n_attributes) if args.selection is None else _read_selection(args.selection, attrs)
    model = bilinear.train(_seen_part(data, split), attrs, mask, hyper, candidates=split.seen_classes)
    out = _out_dir(args)
    bilinear.save_model(out, model, hyper)
    (out / "loss_trajectory.csv").write_text("epoch,loss\n" + "".join(
        f"{i},{v!r}\n" for i, v in enumerate(model.loss_trajectory)))
    _write_config(out, args, {"data": args.data, "selection": args.selection, "bilinear": asdict(hyper),
                              "mask": [int(v) for v in mask]})
    return 0


def cmd_eval(args) -> int:
    data, attrs, split = load_dataset(args.data)
    unseen = _unseen_part(data, split)
    model = bilinear.load_model(args.model)
    mask = np.ones(attrs.n_attributes) if args.selection is None else _read_selection(args.selection, attrs)
    uc = list(split.unseen_classes)
    preds = bilinear.predict(unseen.features, model, attrs, mask, uc)
    names = [attrs.class_names[c] for c in uc]
    conf = confusion(np.searchsorted(uc, preds), np.searchsorted(uc, unseen.labels), len(uc), names)
    n_proj = _pick(args.n_projections, 64)
    metrics = {"per_class_accuracy": per_class_accuracy(preds, unseen.labels),
               "n_samples": unseen.n, "classes": names}
    if args.generated is not None:
        gen, _, _ = load_dataset(args.generated)
        dseed = args.seed + SEED_OFFSETS["distances"]
        metrics["distances"] = {
            "generated_vs_unseen": distribution_distances(gen.features, unseen.features, n_proj, dseed),
            "seen_vs_unseen": distribution_distances(_seen_part(data, split).features, unseen.features,
                                                     n_proj, dseed)}
    out = _out_dir(args)
    _dump_json(out / "metrics.json", metrics)
    (out / "confusion.csv").write_text(conf.to_csv())
    (out / "confusion_percent.csv").write_text(conf.to_csv(percent=True))
    _write_config(out, args, {"data": args.data, "model": args.model, "selection": args.selection,
                              "generated": args.generated, "n_projections": n_proj})
    return 0


def _read_preds(path, attrs: AttributeMatrix):
    index = {n: i for i, n in enumerate(attrs.class_names)}
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    except FileNotFoundError:
        raise ValidationError(f"missing file {path}") from None
    labels, codes = [], []
    for i, ln in enumerate(lines, start=1):
        toks = [t.strip() for t in ln.split(",")]
        if toks[0] not in index:
            raise ValidationError(f"{path} line {i}: class {toks[0]!r} not in attribute file")
        if len(toks) - 1 != attrs.n_attributes:
            raise ValidationError(f"{path} line {i}: expected {attrs.n_attributes} bits, got {len(toks) - 1}")
        if any(t not in ("0", "1") for t in toks[1:]):
            raise ValidationError(f"{path} line {i}: bits must be 0 or 1")
        labels.append(index[toks[0]])
        codes.append([int(t) for t in toks[1:]])
    if not codes:
        raise ValidationError(f"{path}: no predictions")
    return np.array(codes, dtype=np.int8), np.array(labels, dtype=np.int64)


def cmd_bound(args) -> int:
    attrs = read_attributes_csv(args.attrs)
    a_bin = attrs.values
    if not np.all((a_bin == 0) | (a_bin == 1)):
        a_bin = attrs.binarized()
        log.info("attribute file is continuous; binarized at the per-attribute mean")
    codes, labels = _read_preds(args.preds, attrs)
    text = bound_report(codes, labels, a_bin).to_json()
    print(text)
    if args.out is not None:
        out = _out_dir(args)
        (out / "bound.json").write_text(text + "\n")
        _write_config(out, args, {"preds": args.preds, "attrs": args.attrs})
    return 0


def _pipeline_config(args, n_attr: int) -> PipelineConfig:
    base = benchmark_config(args.seed) if args.synth_default else PipelineConfig(seed=args.seed)
    return replace(
        base,
        avae=_avae_hyper(args, base.avae),
        bilinear=_bil_hyper(args, base.bilinear),
        ias=_ias_hyper(args, base.ias, n_attr),
        n_per_class=_pick(args.n_per_class, base.n_per_class),
        n_projections=_pick(args.n_projections, base.n_projections),
        threads=_check_threads(args.threads),
        ias_init=_pick(args.ias_init, base.ias_init))


def cmd_pipeline(args) -> int:
    if args.synth_default == (args.data is not None):
        raise ValidationError("pipeline needs exactly one of --data or --synth-default")
    if args.synth_default:
        p = DEFAULT_SYNTH
        seen, unseen, attrs, split = synth_generate(
            p.n_classes_seen, p.n_classes_unseen, p.n_informative, p.n_noise, p.samples_per_class, p.d,
            p.noise_sigma, args.seed + SEED_OFFSETS["synth"])
    else:
        data, attrs, split = load_dataset(args.data)
        seen, unseen = _seen_part(data, split), _unseen_part(data, split)
    cfg = _pipeline_config(args, attrs.n_attributes)
    report, arts = run_pipeline(seen, unseen, attrs, split, cfg, return_artifacts=True)

    out = _out_dir(args)
    _dump_json(out / "report.json", report)
    sel = arts["selection"]
    _dump_json(out / "selection.json", _selection_json(sel.mask, sel.order, attrs))
    (out / "ias_trace.csv").write_text(arts["trace"].to_csv(attrs))
    for key in ("confusion_baseline", "confusion_ias"):
        (out / f"{key}.csv").write_text(arts[key].to_csv())
        (out / f"{key}_percent.csv").write_text(arts[key].to_csv(percent=True))
    # raw matrices for external embedding plots
    save_dataset(out / "generated", arts["generated"], attrs, split, write_role=True)
    bank_mod.save_bank(out / "attribute_bank.csv", arts["bank"])
    if args.synth_default:
        save_dataset(out / "data", merge(seen, unseen), attrs, split)
    _write_config(out, args, {"data": args.data, "synth_default": args.synth_default,
                              "synth": asdict(DEFAULT_SYNTH) if args.synth_default else None,
                              "pipeline": cfg.to_dict()})
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zslias", description="Zero-shot learning with iterative attribute selection.",
                epilog=SEED_HELP)
    sub = p.add_subparsers(dest="cmd", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a planted synthetic dataset", epilog=SEED_HELP)
    _add_common(s, data_required=None)
    s.add_argument("--n-seen", type=int)
    s.add_argument("--n-unseen", type=int)
    s.add_argument("--n-informative", type=int)
    s.add_argument("--n-noise", type=int)
    s.add_argument("--samples-per-class", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--noise-sigma", type=float)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train-avae", help="train the attribute-conditioned VAE on seen classes",
                       epilog=SEED_HELP)
    _add_common(s, data_required=True)
    _add_avae(s, prefix="")
    s.set_defaults(func=cmd_train_avae)

    s = sub.add_parser("generate", help="sample features for the unseen classes", epilog=SEED_HELP)
    _add_common(s, data_required=True)
    s.add_argument("--model", required=True, help="train-avae output directory")
    s.add_argument("--n-per-class", type=int)
    s.add_argument("--sample-likelihood", action=argparse.BooleanOptionalAction, default=None)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", help="iterative attribute selection on generated data", epilog=SEED_HELP)
    _add_common(s, data_required=False)
    s.add_argument("--generated", required=True, help="generate output directory")
    s.add_argument("--alpha", type=float)
    s.add_argument("--r-mode", choices=["uniform", "ale-rank"])
    _add_ias(s, lr_flag="--lr")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("train", help="train the bilinear model on seen classes", epilog=SEED_HELP)
    _add_common(s, data_required=True)
    _add_bilinear(s)
    s.add_argument("--selection", help="selection.json from select (default: all attributes)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a bilinear model on unseen classes", epilog=SEED_HELP)
    _add_common(s, data_required=True)
    s.add_argument("--model", required=True, help="train output directory")
    s.add_argument("--selection")
    s.add_argument("--generated", help="generated data for distribution distances")
    s.add_argument("--n-projections", type=int)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bound", help="codeword-decoder bound report from predictions", epilog=SEED_HELP)
    s.add_argument("--preds", required=True, help="CSV rows: true class name, then predicted bits")
    s.add_argument("--attrs", required=True, help="attributes.csv")
    s.add_argument("--out", help="also write bound.json here")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("pipeline", help="end-to-end run with report", epilog=SEED_HELP)
    _add_common(s, data_required=False)
    s.add_argument("--synth-default", action="store_true",
                   help="use the planted benchmark data and its tuned settings for unset flags")
    _add_bilinear(s)
    _add_avae(s)
    _add_ias(s)
    s.add_argument("--n-per-class", type=int)
    s.add_argument("--n-projections", type=int)
    s.set_defaults(func=cmd_pipeline)
    return p


def _setup_logging():
    level = os.environ.get("ZSLIAS_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise ValidationError(f"ZSLIAS_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _setup_logging()
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:   # --help
        return int(e.code or 0)
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 2
    except (ZslError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
