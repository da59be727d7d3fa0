"""Experiment harness: baseline ablation, grid search with cross-validation,
the repetition protocol, and CSV emission.

The four baselines are pure sign-pattern restrictions of the (tau_I, tau_S)
grid: plain (0, 0), manifold (>0, 0), lowrank (0, >0), combined (>0, >0).
Every training owns an RNG seeded from a stable hash of
(seed, repetition, grid index, fold), so results are reproducible and
independent of worker count.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from vvlearn.data import (
    Dataset,
    FeatureScaler,
    LabelScaler,
    SplitSpec,
    TaskKind,
    load_dataset,
    make_split,
    split_labeled,
)
from vvlearn.features import FeatureMap, apply_map, build_rff, identity_map
from vvlearn.graph import GraphLaplacian, knn_similarity, laplacian, manifold_matrix
from vvlearn.metrics import aggregate, mc_error, metric_for_task, predict
from vvlearn.prox import SvtMode
from vvlearn.trainer import Hyperparams, loss_for_task, train

CSV_HEADER = [
    "dataset",
    "space",
    "baseline",
    "repetition_or_AGG",
    "metric",
    "value",
    "tau_A",
    "tau_I",
    "tau_S",
    "theta",
    "sigma",
    "seconds",
]

# seed-stream tags keeping the independent RNG uses disjoint
_TAG_SPLIT = 101
_TAG_FOLDS = 102
_TAG_MAP = 103
_TAG_FINAL = 104


class Baseline(enum.Enum):
    PLAIN = "plain"
    MANIFOLD = "manifold"
    LOWRANK = "lowrank"
    COMBINED = "combined"


ALL_BASELINES = (Baseline.PLAIN, Baseline.MANIFOLD, Baseline.LOWRANK, Baseline.COMBINED)


@dataclass(frozen=True)
class Grids:
    """Candidate sets for the grid search. The defaults are the reduced grid
    (a few log-spaced values inside the full ranges); full_grid() gives
    the complete candidate sets, which are opt-in because a full sweep is
    orders of magnitude more expensive."""

    tau_A: tuple = (1e-14, 1e-10, 1e-6)
    tau_I: tuple = (0.0, 1e-14, 1e-10, 1e-6)
    tau_S: tuple = (0.0, 1e-7, 1e-4, 1e-1)
    theta_fracs: tuple = (0.0, 0.3, 0.6)
    sigmas: tuple = (0.25, 1.0, 4.0)

    def __post_init__(self):
        for name in ("tau_A", "tau_I", "tau_S", "theta_fracs", "sigmas"):
            if not len(getattr(self, name)):
                raise ValueError(f"grid {name} must be nonempty")


def full_grid() -> Grids:
    return Grids(
        tau_A=tuple(10.0 ** (-e) for e in range(15, 5, -1)),
        tau_I=(0.0,) + tuple(10.0 ** (-e) for e in range(15, 5, -1)),
        tau_S=(0.0,) + tuple(10.0 ** (-e) for e in range(10, 0, -1)),
        theta_fracs=tuple(round(0.1 * i, 1) for i in range(10)),
        sigmas=tuple(2.0**e for e in range(-5, 6)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str | None = None
    dataset_name: str = "dataset"
    task: TaskKind = TaskKind.MULTICLASS
    space: str = "rff"  # "linear" or "rff"
    D: int = 100
    split: SplitSpec = SplitSpec()
    repetitions: int = 30
    cv_folds: int = 5
    grids: Grids = Grids()
    baselines: tuple[Baseline, ...] = ALL_BASELINES
    svt_mode: SvtMode = SvtMode.TAIL_SHRINK
    knn_k: int = 10
    batch_size: int = 64
    max_iters: int = 2000
    early_stop: bool = True
    xi: float = 0.95
    eps: float = 1e-6
    seed: int = 0
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.space not in ("linear", "rff"):
            raise ValueError(f"space must be 'linear' or 'rff', got {self.space!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if not self.baselines:
            raise ValueError("at least one baseline is required")


def config_from_dict(obj: dict) -> ExperimentConfig:
    """Build a config from a plain dict (JSON file contents + overrides)."""
    obj = dict(obj)
    kwargs = {}
    if "task" in obj:
        kwargs["task"] = TaskKind(obj.pop("task"))
    if "svt_mode" in obj:
        kwargs["svt_mode"] = SvtMode(obj.pop("svt_mode"))
    if "baselines" in obj:
        kwargs["baselines"] = tuple(Baseline(b) for b in obj.pop("baselines"))
    if "split" in obj:
        kwargs["split"] = SplitSpec(**obj.pop("split"))
    if "grids" in obj:
        kwargs["grids"] = Grids(**{k: tuple(v) for k, v in obj.pop("grids").items()})
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    kwargs.update(obj)
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class GridPoint:
    tau_A: float
    tau_I: float
    tau_S: float
    theta_frac: float
    sigma: float | None  # None in the linear space


@dataclass(frozen=True)
class GridChoice:
    point: GridPoint
    grid_index: int
    cv_score: float


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    space: str
    baseline: str
    repetition_or_AGG: str
    metric: str
    value: float
    tau_A: float | None
    tau_I: float | None
    tau_S: float | None
    theta: int | None
    sigma: float | None
    seconds: float

    def to_csv_fields(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(float(v))

        return [
            self.dataset,
            self.space,
            self.baseline,
            self.repetition_or_AGG,
            self.metric,
            repr(float(self.value)),
            num(self.tau_A),
            num(self.tau_I),
            num(self.tau_S),
            "" if self.theta is None else str(int(self.theta)),
            num(self.sigma),
            repr(float(self.seconds)),
        ]


def baseline_constraints(baseline: Baseline, grids: Grids) -> tuple[tuple, tuple]:
    """Restrict the (tau_I, tau_S) candidates to the baseline's sign pattern."""
    pos_i = tuple(v for v in grids.tau_I if v > 0)
    pos_s = tuple(v for v in grids.tau_S if v > 0)
    if baseline in (Baseline.MANIFOLD, Baseline.COMBINED) and not pos_i:
        raise ValueError(f"{baseline.value} needs positive tau_I candidates")
    if baseline in (Baseline.LOWRANK, Baseline.COMBINED) and not pos_s:
        raise ValueError(f"{baseline.value} needs positive tau_S candidates")
    tau_i = pos_i if baseline in (Baseline.MANIFOLD, Baseline.COMBINED) else (0.0,)
    tau_s = pos_s if baseline in (Baseline.LOWRANK, Baseline.COMBINED) else (0.0,)
    return tau_i, tau_s


def enumerate_grid(grids: Grids, baseline: Baseline, space: str) -> list[GridPoint]:
    """All candidate points in deterministic nested order.

    theta only matters when tau_S > 0 and sigma only in the kernel space, so
    those axes collapse to a single value when inert.
    """
    tau_i_c, tau_s_c = baseline_constraints(baseline, grids)
    sigmas = grids.sigmas if space == "rff" else (None,)
    points = []
    for a in grids.tau_A:
        for i in tau_i_c:
            for s in tau_s_c:
                fracs = grids.theta_fracs if s > 0 else (0.0,)
                for frac in fracs:
                    for sg in sigmas:
                        points.append(GridPoint(a, i, s, frac, sg))
    return points


def theta_from_fraction(frac: float, K: int, S_feat: int) -> int:
    return int(math.floor(frac * min(K, S_feat) + 1e-9))


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _sigma_index(grids: Grids, sigma: float | None) -> int:
    return 0 if sigma is None else grids.sigmas.index(sigma)


def _make_map(cfg: ExperimentConfig, d: int, sigma: float | None, rep: int) -> FeatureMap:
    if cfg.space == "linear":
        return identity_map(d)
    if sigma is None:
        raise ValueError("kernel space needs sigma")
    return build_rff(d, cfg.D, sigma, _seed(cfg.seed, rep, _TAG_MAP, _sigma_index(cfg.grids, sigma)))


def _feature_dim(cfg: ExperimentConfig, d: int) -> int:
    return d if cfg.space == "linear" else cfg.D


def _hp_for_point(cfg: ExperimentConfig, pt: GridPoint, K: int, S_feat: int, seed: int) -> Hyperparams:
    return Hyperparams(
        tau_A=pt.tau_A,
        tau_I=pt.tau_I,
        tau_S=pt.tau_S,
        theta=theta_from_fraction(pt.theta_frac, K, S_feat),
        batch_size=cfg.batch_size,
        max_iters=cfg.max_iters,
        xi=cfg.xi,
        eps=cfg.eps,
        seed=seed,
        svt_mode=cfg.svt_mode,
        early_stop=cfg.early_stop,
    )


def _knn_graph(X_nodes: np.ndarray, fmap: FeatureMap, k: int) -> GraphLaplacian:
    n = X_nodes.shape[0]
    S = np.zeros((n, n)) if n < 2 else knn_similarity(X_nodes, min(k, n - 1))
    L = laplacian(S)
    Phi = apply_map(fmap, X_nodes)
    return GraphLaplacian(S=S, L=L, M=manifold_matrix(Phi.T, L))


def _masked_metric(task: TaskKind, preds: np.ndarray, Y: np.ndarray, mask: np.ndarray) -> float:
    """Validation metric over observed entries only; equals the plain metric
    when the mask is full."""
    if task is TaskKind.MULTICLASS:
        return mc_error(preds, Y)
    if not mask.all():
        if task is TaskKind.MULTILABEL_CLASSIFICATION:
            return float(np.mean(preds[mask] != Y[mask])) if mask.any() else 0.0
        residual = (preds - Y) * mask
        norms = np.sqrt((residual**2).sum(axis=1))
        return float(norms.sum() / (Y.shape[0] * Y.shape[1]))
    return metric_for_task(task)(preds, Y)


def grid_search(train_ds: Dataset, cfg: ExperimentConfig, baseline: Baseline, rep: int = 0) -> GridChoice:
    """Pick the grid point with minimal mean validation metric over the folds.

    Folds partition the labeled rows; the unlabeled rows join every fold's
    graph and the held-out fold is excluded from it. Ties resolve to the
    first point in enumeration order. Validation scores only the observed
    label entries of the held-out rows.
    """
    labeled, unlabeled = split_labeled(train_ds)
    if labeled.n < cfg.cv_folds:
        raise ValueError(f"need >= {cfg.cv_folds} labeled samples for CV, got {labeled.n}")
    loss = loss_for_task(cfg.task)
    points = enumerate_grid(cfg.grids, baseline, cfg.space)
    K = train_ds.K
    S_feat = _feature_dim(cfg, train_ds.d)

    perm = np.random.default_rng(_seed(cfg.seed, rep, _TAG_FOLDS)).permutation(labeled.n)
    folds = [np.sort(f) for f in np.array_split(perm, cfg.cv_folds)]
    fold_train_idx = [
        np.sort(np.concatenate([folds[j] for j in range(cfg.cv_folds) if j != i]))
        for i in range(cfg.cv_folds)
    ]

    maps: dict[int, FeatureMap] = {}
    graphs: dict[tuple[int, int], GraphLaplacian] = {}
    phis: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def map_for(sigma):
        key = _sigma_index(cfg.grids, sigma)
        if key not in maps:
            maps[key] = _make_map(cfg, train_ds.d, sigma, rep)
        return maps[key]

    best: GridChoice | None = None
    for gidx, pt in enumerate(points):
        fmap = map_for(pt.sigma)
        skey = _sigma_index(cfg.grids, pt.sigma)
        fold_scores = []
        for fidx in range(cfg.cv_folds):
            tr_idx, val_idx = fold_train_idx[fidx], folds[fidx]
            lab_tr = labeled.subset(tr_idx)
            graph = None
            if pt.tau_I > 0:
                gkey = (fidx, skey)
                if gkey not in graphs:
                    X_nodes = np.vstack([lab_tr.X, unlabeled.X])
                    graphs[gkey] = _knn_graph(X_nodes, fmap, cfg.knn_k)
                graph = graphs[gkey]
            pkey = (fidx, skey)
            if pkey not in phis:
                phis[pkey] = (apply_map(fmap, lab_tr.X), apply_map(fmap, labeled.X[val_idx]))
            phi_tr, phi_val = phis[pkey]
            hp = _hp_for_point(cfg, pt, K, S_feat, _seed(cfg.seed, rep, gidx, fidx))
            w = train(lab_tr, unlabeled, fmap, graph, loss, hp)
            preds = predict(w.W, phi_val, cfg.task)
            fold_scores.append(
                _masked_metric(cfg.task, preds, labeled.Y[val_idx], labeled.mask[val_idx])
            )
        score = float(np.mean(fold_scores))
        if best is None or score < best.cv_score:
            best = GridChoice(point=pt, grid_index=gidx, cv_score=score)
    return best


def _final_fit(
    train_ds: Dataset, cfg: ExperimentConfig, choice: GridChoice, rep: int
) -> tuple[np.ndarray, FeatureMap, Hyperparams]:
    """Train on the full labeled + unlabeled train split at the chosen point."""
    labeled, unlabeled = split_labeled(train_ds)
    pt = choice.point
    fmap = _make_map(cfg, train_ds.d, pt.sigma, rep)
    graph = None
    if pt.tau_I > 0:
        graph = _knn_graph(np.vstack([labeled.X, unlabeled.X]), fmap, cfg.knn_k)
    hp = _hp_for_point(
        cfg,
        pt,
        train_ds.K,
        _feature_dim(cfg, train_ds.d),
        _seed(cfg.seed, rep, _TAG_FINAL, choice.grid_index),
    )
    w = train(labeled, unlabeled, fmap, graph, loss_for_task(cfg.task), hp)
    return w.W, fmap, hp


def prepare_repetition(cfg: ExperimentConfig, ds: Dataset, rep: int) -> tuple[Dataset, Dataset]:
    """Fresh split for this repetition, normalized with train statistics."""
    split = replace(cfg.split, seed=_seed(cfg.seed, rep, _TAG_SPLIT))
    train_raw, test_raw = make_split(ds, split)
    scaler = FeatureScaler().fit(train_raw.X)
    train_ds = replace(train_raw, X=scaler.transform(train_raw.X))
    test_ds = replace(test_raw, X=scaler.transform(test_raw.X))
    if cfg.task is TaskKind.MULTILABEL_REGRESSION:
        lscaler = LabelScaler().fit(train_raw.Y)
        train_ds = replace(train_ds, Y=lscaler.transform(train_ds.Y))
        test_ds = replace(test_ds, Y=lscaler.transform(test_ds.Y))
    return train_ds, test_ds


def _metric_name(task: TaskKind) -> str:
    return {
        TaskKind.MULTICLASS: "mc_error",
        TaskKind.MULTILABEL_CLASSIFICATION: "hamming_loss",
        TaskKind.MULTILABEL_REGRESSION: "rmse",
    }[task]


def _run_repetition(cfg: ExperimentConfig, ds: Dataset, rep: int) -> list[dict]:
    train_ds, test_ds = prepare_repetition(cfg, ds, rep)
    out = []
    for baseline in cfg.baselines:
        t0 = time.perf_counter()
        choice = grid_search(train_ds, cfg, baseline, rep)
        W, fmap, hp = _final_fit(train_ds, cfg, choice, rep)
        preds = predict(W, apply_map(fmap, test_ds.X), cfg.task)
        value = metric_for_task(cfg.task)(preds, test_ds.Y)
        out.append(
            {
                "baseline": baseline,
                "rep": rep,
                "value": value,
                "tau_A": choice.point.tau_A,
                "tau_I": choice.point.tau_I,
                "tau_S": choice.point.tau_S,
                "theta": hp.theta,
                "sigma": choice.point.sigma,
                "seconds": time.perf_counter() - t0,
            }
        )
    return out


def _run_repetition_star(args):
    return _run_repetition(*args)


def _rep_sort_key(row: ResultRow):
    rep = float("inf") if row.repetition_or_AGG == "AGG" else int(row.repetition_or_AGG)
    return (row.dataset, row.space, row.baseline, rep, row.metric)


def write_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.to_csv_fields())


def _collect_rows(cfg: ExperimentConfig, metric: str, rep_results: list[list[dict]]) -> list[ResultRow]:
    rows = []
    per_baseline: dict[Baseline, list[dict]] = {b: [] for b in cfg.baselines}
    for rep_out in rep_results:
        for r in rep_out:
            per_baseline[r["baseline"]].append(r)
            rows.append(
                ResultRow(
                    dataset=cfg.dataset_name,
                    space=cfg.space,
                    baseline=r["baseline"].value,
                    repetition_or_AGG=str(r["rep"]),
                    metric=metric,
                    value=r["value"],
                    tau_A=r["tau_A"],
                    tau_I=r["tau_I"],
                    tau_S=r["tau_S"],
                    theta=r["theta"],
                    sigma=r["sigma"],
                    seconds=r["seconds"],
                )
            )
    for baseline, rs in per_baseline.items():
        agg = aggregate([r["value"] for r in rs], metric)
        total = sum(r["seconds"] for r in rs)
        for suffix, value in (("mean", agg.mean), ("std", agg.std)):
            rows.append(
                ResultRow(
                    dataset=cfg.dataset_name,
                    space=cfg.space,
                    baseline=baseline.value,
                    repetition_or_AGG="AGG",
                    metric=f"{metric}_{suffix}",
                    value=value,
                    tau_A=None,
                    tau_I=None,
                    tau_S=None,
                    theta=None,
                    sigma=None,
                    seconds=total,
                )
            )
    rows.sort(key=_rep_sort_key)
    return rows


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> list[ResultRow]:
    """Full protocol: per repetition a fresh split, grid search per baseline,
    final fit on the whole train split, test evaluation; aggregated rows
    appended and the CSV written when cfg.output is set."""
    ds = dataset if dataset is not None else load_dataset(cfg.dataset_path, cfg.task)
    tasks = [(cfg, ds, rep) for rep in range(cfg.repetitions)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            rep_results = list(ex.map(_run_repetition_star, tasks))
    else:
        rep_results = [_run_repetition(*t) for t in tasks]
    rows = _collect_rows(cfg, _metric_name(cfg.task), rep_results)
    if cfg.output:
        write_csv(rows, cfg.output)
    return rows


THETA_SWEEP_FRACS = tuple(round(0.1 * i, 1) for i in range(11))


def theta_sweep(cfg: ExperimentConfig, dataset: Dataset | None = None) -> list[ResultRow]:
    """Vary the threshold fraction with everything else at the CV optimum.

    Grid-searches the combined baseline once per repetition, then refits at
    each theta fraction in {0.0, 0.1, ..., 1.0}. Returns the 11 aggregate
    mean rows; the CSV additionally carries per-repetition and std rows.
    """
    ds = dataset if dataset is not None else load_dataset(cfg.dataset_path, cfg.task)
    metric = _metric_name(cfg.task)
    per_frac: dict[float, list[tuple[float, int]]] = {f: [] for f in THETA_SWEEP_FRACS}
    rep_rows: list[ResultRow] = []
    for rep in range(cfg.repetitions):
        train_ds, test_ds = prepare_repetition(cfg, ds, rep)
        choice = grid_search(train_ds, cfg, Baseline.COMBINED, rep)
        # matched seeds across fractions: the runs differ only through theta,
        # so the frac=1.0 endpoint coincides bitwise with an empty-tail run
        for frac in THETA_SWEEP_FRACS:
            t0 = time.perf_counter()
            pt = replace(choice.point, theta_frac=frac)
            ch = GridChoice(point=pt, grid_index=choice.grid_index, cv_score=choice.cv_score)
            W, fmap, hp = _final_fit(train_ds, cfg, ch, rep)
            preds = predict(W, apply_map(fmap, test_ds.X), cfg.task)
            value = metric_for_task(cfg.task)(preds, test_ds.Y)
            per_frac[frac].append((value, hp.theta))
            rep_rows.append(
                ResultRow(
                    dataset=cfg.dataset_name,
                    space=cfg.space,
                    baseline=Baseline.COMBINED.value,
                    repetition_or_AGG=str(rep),
                    metric=f"{metric}@theta_frac={frac}",
                    value=value,
                    tau_A=pt.tau_A,
                    tau_I=pt.tau_I,
                    tau_S=pt.tau_S,
                    theta=hp.theta,
                    sigma=pt.sigma,
                    seconds=time.perf_counter() - t0,
                )
            )
    agg_rows = []
    for frac in THETA_SWEEP_FRACS:
        values = [v for v, _ in per_frac[frac]]
        theta = per_frac[frac][0][1]
        agg = aggregate(values, metric)
        agg_rows.append(
            ResultRow(
                dataset=cfg.dataset_name,
                space=cfg.space,
                baseline=Baseline.COMBINED.value,
                repetition_or_AGG="AGG",
                metric=f"{metric}_mean@theta_frac={frac}",
                value=agg.mean,
                tau_A=None,
                tau_I=None,
                tau_S=None,
                theta=theta,
                sigma=None,
                seconds=0.0,
            )
        )
    if cfg.output:
        write_csv(rep_rows + agg_rows, cfg.output)
    return agg_rows


DEFAULT_LABEL_RATES = (0.1, 0.2, 0.3, 0.4, 0.5)


def label_rate_sweep(
    cfg: ExperimentConfig,
    rates: tuple[float, ...] = DEFAULT_LABEL_RATES,
    dataset: Dataset | None = None,
) -> list[ResultRow]:
    """Rerun the full protocol at several labeled fractions.

    Returns the aggregate mean rows, one per (rate, baseline); the rate is
    encoded in the dataset column as name[rate=r] to keep the CSV schema
    fixed.
    """
    ds = dataset if dataset is not None else load_dataset(cfg.dataset_path, cfg.task)
    all_rows: list[ResultRow] = []
    mean_rows: list[ResultRow] = []
    for rate in rates:
        sub = replace(
            cfg,
            split=replace(cfg.split, labeled_fraction_of_train=rate),
            dataset_name=f"{cfg.dataset_name}[rate={rate}]",
            output=None,
        )
        rows = run_experiment(sub, dataset=ds)
        all_rows.extend(rows)
        mean_rows.extend(
            r for r in rows if r.repetition_or_AGG == "AGG" and r.metric.endswith("_mean")
        )
    if cfg.output:
        write_csv(all_rows, cfg.output)
    return mean_rows


@dataclass(frozen=True)
class ModelBlob:
    """Everything needed to replay a fit on new data."""

    W: np.ndarray
    fmap: FeatureMap
    feature_scaler: FeatureScaler
    label_scaler: LabelScaler | None
    task: TaskKind


def save_model(path, blob: ModelBlob) -> None:
    meta = {
        "fmap": json.loads(blob.fmap.to_json()),
        "feature_scaler": blob.feature_scaler.to_dict(),
        "label_scaler": blob.label_scaler.to_dict() if blob.label_scaler else None,
        "task": blob.task.value,
    }
    # np.savez appends ".npz" to bare string paths; an open handle keeps
    # the requested name exactly
    with open(path, "wb") as fh:
        np.savez(fh, W=blob.W, meta=np.array(json.dumps(meta)))


def load_model(path) -> ModelBlob:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"].item()))
    return ModelBlob(
        W=data["W"],
        fmap=FeatureMap.from_json(json.dumps(meta["fmap"])),
        feature_scaler=FeatureScaler.from_dict(meta["feature_scaler"]),
        label_scaler=LabelScaler.from_dict(meta["label_scaler"]) if meta["label_scaler"] else None,
        task=TaskKind(meta["task"]),
    )
