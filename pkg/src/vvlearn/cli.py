"""Command-line interface.

Subcommands: train (single fit to a model file), eval (model + dataset to
metrics), cv (grid search only), experiment (full repetition protocol to
CSV), theta-sweep, label-rate-sweep. Config-driven subcommands read a JSON
file via --config; every top-level config field has a flag of the same name
that overrides the file.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from vvlearn.data import (
    Dataset,
    FeatureScaler,
    SplitSpec,
    TaskKind,
    load_dataset,
    make_split,
    split_labeled,
)
from vvlearn.experiment import (
    Baseline,
    ModelBlob,
    config_from_dict,
    grid_search,
    label_rate_sweep,
    load_model,
    prepare_repetition,
    run_experiment,
    save_model,
    theta_sweep,
)
from vvlearn.features import apply_map, build_rff, identity_map
from vvlearn.graph import build_graph
from vvlearn.metrics import metric_for_task, predict
from vvlearn.prox import SvtMode
from vvlearn.trainer import Hyperparams, loss_for_task, objective_value, train

_CONFIG_FIELDS = {
    "dataset_path": str,
    "dataset_name": str,
    "task": str,
    "space": str,
    "D": int,
    "repetitions": int,
    "cv_folds": int,
    "svt_mode": str,
    "knn_k": int,
    "batch_size": int,
    "max_iters": int,
    "xi": float,
    "eps": float,
    "seed": int,
    "workers": int,
    "output": str,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    for name, typ in _CONFIG_FIELDS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    p.add_argument("--early-stop", dest="early_stop", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--baselines", dest="baselines", default=None, help="comma list: plain,manifold,lowrank,combined")
    p.add_argument("--split", dest="split", default=None, help="JSON object for the split spec")
    p.add_argument("--grids", dest="grids", default=None, help="JSON object for the candidate grids")


def _config_from_args(args: argparse.Namespace):
    obj = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    for name in list(_CONFIG_FIELDS) + ["early_stop"]:
        value = getattr(args, name, None)
        if value is not None:
            obj[name] = value
    if args.baselines is not None:
        obj["baselines"] = [b.strip() for b in args.baselines.split(",") if b.strip()]
    if args.split is not None:
        obj["split"] = json.loads(args.split)
    if args.grids is not None:
        obj["grids"] = json.loads(args.grids)
    return config_from_dict(obj)


def _mode(name: str) -> SvtMode:
    return SvtMode(name)


def _cmd_train(args: argparse.Namespace) -> int:
    task = TaskKind(args.task)
    ds = load_dataset(args.data, task)
    if args.labeled_fraction < 1.0 or args.missing_label_fraction > 0:
        spec = SplitSpec(
            train_fraction=1.0,
            labeled_fraction_of_train=args.labeled_fraction,
            missing_label_fraction=args.missing_label_fraction,
            seed=args.seed,
        )
        ds, _ = make_split(ds, spec)
    scaler = FeatureScaler().fit(ds.X)
    ds = Dataset(scaler.transform(ds.X), ds.Y, ds.mask, ds.task)

    if args.space == "rff":
        if args.sigma is None:
            raise ValueError("--sigma is required for the rff space")
        fmap = build_rff(ds.d, args.D, args.sigma, args.seed)
    else:
        fmap = identity_map(ds.d)
    labeled, unlabeled = split_labeled(ds)
    graph = None
    if args.tau_i > 0:
        graph = build_graph(np.vstack([labeled.X, unlabeled.X]), fmap, k=args.knn_k)
    hp = Hyperparams(
        tau_A=args.tau_a,
        tau_I=args.tau_i,
        tau_S=args.tau_s,
        theta=args.theta,
        batch_size=args.batch_size,
        max_iters=args.max_iters,
        xi=args.xi,
        eps=args.eps,
        seed=args.seed,
        svt_mode=_mode(args.svt_mode),
        early_stop=args.early_stop,
    )
    loss = loss_for_task(task)
    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        w = train(labeled, unlabeled, fmap, graph, loss, hp, trace=trace_fh)
    finally:
        if trace_fh:
            trace_fh.close()
    obj = objective_value(w.W, labeled, fmap, graph.M if graph else None, loss, hp)
    save_model(args.out, ModelBlob(w.W, fmap, scaler, None, task))
    print(f"trained on {labeled.n} labeled / {unlabeled.n} unlabeled samples")
    print(f"objective {obj!r}")
    print(f"model written to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    blob = load_model(args.model)
    ds = load_dataset(args.data, blob.task)
    Phi = apply_map(blob.fmap, blob.feature_scaler.transform(ds.X))
    preds = predict(blob.W, Phi, blob.task)
    metric = metric_for_task(blob.task)
    print(f"samples {ds.n}")
    print(f"{metric.__name__} {metric(preds, ds.Y)!r}")
    return 0


def _cmd_cv(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    ds = load_dataset(cfg.dataset_path, cfg.task)
    train_ds, _ = prepare_repetition(cfg, ds, args.repetition)
    choice = grid_search(train_ds, cfg, Baseline(args.baseline), args.repetition)
    print(
        json.dumps(
            {
                "tau_A": choice.point.tau_A,
                "tau_I": choice.point.tau_I,
                "tau_S": choice.point.tau_S,
                "theta_frac": choice.point.theta_frac,
                "sigma": choice.point.sigma,
                "cv_score": choice.cv_score,
            }
        )
    )
    return 0


def _print_agg(rows) -> None:
    for row in rows:
        if row.repetition_or_AGG == "AGG" or row.metric.endswith("_mean"):
            print(f"{row.dataset} {row.space} {row.baseline} {row.metric} {row.value:.6f}")


def _cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    rows = run_experiment(cfg)
    _print_agg([r for r in rows if r.repetition_or_AGG == "AGG"])
    if cfg.output:
        print(f"results written to {cfg.output}")
    return 0


def _cmd_theta_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    rows = theta_sweep(cfg)
    _print_agg(rows)
    if cfg.output:
        print(f"results written to {cfg.output}")
    return 0


def _cmd_label_rate_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    rates = tuple(float(r) for r in args.rates.split(",")) if args.rates else None
    rows = label_rate_sweep(cfg, rates) if rates else label_rate_sweep(cfg)
    _print_agg(rows)
    if cfg.output:
        print(f"results written to {cfg.output}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vvlearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="single fit, writes a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=["mc", "mlc"], required=True)
    p.add_argument("--space", choices=["linear", "rff"], default="linear")
    p.add_argument("--D", type=int, default=100)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--tau-a", dest="tau_a", type=float, default=1e-6)
    p.add_argument("--tau-i", dest="tau_i", type=float, default=0.0)
    p.add_argument("--tau-s", dest="tau_s", type=float, default=0.0)
    p.add_argument("--theta", type=int, default=0)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=2000)
    p.add_argument("--xi", type=float, default=0.95)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=10)
    p.add_argument("--svt-mode", dest="svt_mode", choices=["tail", "head"], default="tail")
    p.add_argument("--labeled-fraction", dest="labeled_fraction", type=float, default=1.0)
    p.add_argument(
        "--missing-label-fraction", dest="missing_label_fraction", type=float, default=0.0
    )
    p.add_argument("--early-stop", dest="early_stop", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--trace", default=None, help="write per-iteration CSV trace here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model file on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cv", help="grid search only; prints the chosen point")
    _add_config_flags(p)
    p.add_argument("--baseline", default="combined")
    p.add_argument("--repetition", type=int, default=0)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("experiment", help="full repetition protocol, CSV output")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("theta-sweep", help="vary the threshold fraction at the CV optimum")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_theta_sweep)

    p = sub.add_parser("label-rate-sweep", help="rerun the protocol at several labeled fractions")
    _add_config_flags(p)
    p.add_argument("--rates", default=None, help="comma list of labeled fractions")
    p.set_defaults(func=_cmd_label_rate_sweep)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
