"""Dataset container, sparse text formats, splits, and normalization.

The on-disk formats are line-oriented UTF-8 with 1-based feature indices:

multi-class        ``<label> <idx>:<val> <idx>:<val> ...``
multi-label        ``<l1>,<l2>,... <idx>:<val> ...`` (label list may be empty,
                   in which case the line starts with whitespace)

Multi-label regression has no text format; build those datasets directly from
arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np


class TaskKind(enum.Enum):
    MULTICLASS = "mc"
    MULTILABEL_CLASSIFICATION = "mlc"
    MULTILABEL_REGRESSION = "mlr"


@dataclass(frozen=True)
class Dataset:
    """Features, labels, and an entrywise observation mask.

    Parameters
    ----------
    X : ndarray, shape (n, d)
        Dense feature matrix.
    Y : ndarray, shape (n, K)
        Dense label matrix. One-hot rows for multi-class, 0/1 entries for
        multi-label classification, reals for multi-label regression.
    mask : ndarray of bool, shape (n, K)
        True where the label entry is observed. A row that is entirely False
        is an unlabeled sample.
    task : TaskKind
    """

    X: np.ndarray
    Y: np.ndarray
    mask: np.ndarray
    task: TaskKind

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if X.ndim != 2 or Y.ndim != 2:
            raise ValueError("X and Y must be 2-D")
        if X.shape[0] != Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if mask.shape != Y.shape:
            raise ValueError("mask shape must match Y")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "mask", mask)
        if self.task is TaskKind.MULTICLASS:
            # one-hot rows, fully observed or fully unlabeled
            rows_any = mask.any(axis=1)
            rows_all = mask.all(axis=1)
            if not np.array_equal(rows_any, rows_all):
                raise ValueError("multi-class rows must be fully observed or fully unlabeled")
            obs = Y[rows_all]
            if obs.size and not (
                np.all((obs == 0.0) | (obs == 1.0)) and np.all(obs.sum(axis=1) == 1.0)
            ):
                raise ValueError("observed multi-class rows must be one-hot")
        elif self.task is TaskKind.MULTILABEL_CLASSIFICATION:
            if Y.size and not np.all((Y == 0.0) | (Y == 1.0)):
                raise ValueError("multi-label classification labels must be 0/1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def K(self) -> int:
        return self.Y.shape[1]

    def labeled_indices(self) -> np.ndarray:
        """Indices of rows with at least one observed label entry."""
        return np.flatnonzero(self.mask.any(axis=1))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.Y[idx], self.mask[idx], self.task)


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split protocol.

    train_fraction of the samples become the train split; within it,
    ceil(labeled_fraction_of_train * n_train) rows keep their labels and the
    rest are unlabeled. For multi-label tasks a further
    missing_label_fraction of the observed (sample, label) entries is then
    masked uniformly at random.
    """

    train_fraction: float = 0.70
    labeled_fraction_of_train: float = 0.10
    missing_label_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "labeled_fraction_of_train", "missing_label_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def _parse_feature_token(token: str, lineno: int) -> tuple[int, float]:
    head, sep, tail = token.partition(":")
    if not sep:
        raise ValueError(f"line {lineno}: expected <idx>:<val>, got {token!r}")
    try:
        idx = int(head)
        val = float(tail)
    except ValueError:
        raise ValueError(f"line {lineno}: malformed feature token {token!r}") from None
    if idx < 1:
        raise ValueError(f"line {lineno}: feature indices are 1-based, got {idx}")
    return idx, val


def _decode(text) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8")
    return text


def _rows_to_matrix(rows: list[dict[int, float]]) -> np.ndarray:
    d = max((max(r) for r in rows if r), default=0)
    X = np.zeros((len(rows), d))
    for i, r in enumerate(rows):
        for j, v in r.items():
            X[i, j - 1] = v
    return X


def parse_sparse_multiclass(text) -> Dataset:
    """Parse ``<label> <idx>:<val>...`` lines into a one-hot dataset.

    Classes are the distinct integer labels in the input, one-hot encoded in
    sorted order. d is the largest feature index seen; absent indices are 0.
    """
    rows: list[dict[int, float]] = []
    labels: list[int] = []
    for lineno, line in enumerate(_decode(text).splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            labels.append(int(tokens[0]))
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer label {tokens[0]!r}") from None
        feats = dict(_parse_feature_token(t, lineno) for t in tokens[1:])
        rows.append(feats)
    if not rows:
        raise ValueError("no samples")
    classes = sorted(set(labels))
    col = {c: j for j, c in enumerate(classes)}
    Y = np.zeros((len(rows), len(classes)))
    for i, lab in enumerate(labels):
        Y[i, col[lab]] = 1.0
    X = _rows_to_matrix(rows)
    return Dataset(X, Y, np.ones_like(Y, dtype=bool), TaskKind.MULTICLASS)


def parse_sparse_multilabel(text) -> Dataset:
    """Parse ``<l1>,<l2>,... <idx>:<val>...`` lines into a 0/1 indicator dataset.

    The label alphabet is every distinct label observed in the file, in sorted
    order. A line whose first token contains ':' carries an empty label list.
    """
    rows: list[dict[int, float]] = []
    row_labels: list[set[int]] = []
    for lineno, line in enumerate(_decode(text).splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        labs: set[int] = set()
        feat_tokens = tokens
        if ":" not in tokens[0]:
            for part in tokens[0].split(","):
                try:
                    labs.add(int(part))
                except ValueError:
                    raise ValueError(
                        f"line {lineno}: non-integer label {part!r}"
                    ) from None
            feat_tokens = tokens[1:]
        rows.append(dict(_parse_feature_token(t, lineno) for t in feat_tokens))
        row_labels.append(labs)
    if not rows:
        raise ValueError("no samples")
    alphabet = sorted(set().union(*row_labels))
    if not alphabet:
        raise ValueError("no labels observed in input")
    col = {c: j for j, c in enumerate(alphabet)}
    Y = np.zeros((len(rows), len(alphabet)))
    for i, labs in enumerate(row_labels):
        for lab in labs:
            Y[i, col[lab]] = 1.0
    X = _rows_to_matrix(rows)
    return Dataset(X, Y, np.ones_like(Y, dtype=bool), TaskKind.MULTILABEL_CLASSIFICATION)


def _format_features(x: np.ndarray) -> str:
    return " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(x) if v != 0.0)


def _dimension_hint(X: np.ndarray) -> str:
    # a zero-valued token at the last index pins d when the last column is all zero
    return f"{X.shape[1]}:0"


def serialize_sparse_multiclass(ds: Dataset) -> str:
    """Inverse of parse_sparse_multiclass; classes are written as 1..K."""
    if ds.task is not TaskKind.MULTICLASS:
        raise ValueError("serialize_sparse_multiclass requires a multi-class dataset")
    lines = []
    for i in range(ds.n):
        label = int(np.argmax(ds.Y[i])) + 1
        feats = _format_features(ds.X[i])
        lines.append(f"{label} {feats}".rstrip())
    if ds.d and not np.any(ds.X[:, -1] != 0.0):
        lines[0] = f"{lines[0]} {_dimension_hint(ds.X)}"
    return "\n".join(lines) + "\n"


def serialize_sparse_multilabel(ds: Dataset) -> str:
    """Inverse of parse_sparse_multilabel; labels are written as 1..K.

    Round-trips only when every label column has at least one positive row:
    the format carries no alphabet, so an all-zero column is unrepresentable.
    """
    if ds.task is not TaskKind.MULTILABEL_CLASSIFICATION:
        raise ValueError("serialize_sparse_multilabel requires a multi-label dataset")
    lines = []
    for i in range(ds.n):
        labs = ",".join(str(j + 1) for j in np.flatnonzero(ds.Y[i]))
        feats = _format_features(ds.X[i])
        if not feats and not labs:
            feats = _dimension_hint(ds.X) if ds.d else ""
        lines.append(f"{labs} {feats}".rstrip())
    if ds.d and not np.any(ds.X[:, -1] != 0.0):
        lines[0] = f"{lines[0]} {_dimension_hint(ds.X)}"
    return "\n".join(lines) + "\n"


def load_dataset(path, task: TaskKind) -> Dataset:
    """Read a dataset file in the sparse text format for its task."""
    if task is TaskKind.MULTILABEL_REGRESSION:
        raise ValueError(
            "multi-label regression has no text format; build the Dataset from arrays"
        )
    with open(path, "rb") as fh:
        text = fh.read()
    if task is TaskKind.MULTICLASS:
        return parse_sparse_multiclass(text)
    return parse_sparse_multilabel(text)


class FeatureScaler:
    """Column min-max to [0, 1], then divide all rows by the largest training
    row norm so that sup ||x||_2 <= 1 on the data the scaler was fit to.

    Constant columns scale to 0. Test rows may exceed the unit ball; they are
    not clipped.
    """

    def __init__(self):
        self.col_min = None
        self.col_scale = None
        self.row_div = None

    def fit(self, X: np.ndarray) -> "FeatureScaler":
        X = np.asarray(X, dtype=float)
        self.col_min = X.min(axis=0) if X.size else np.zeros(X.shape[1])
        rng = (X.max(axis=0) - self.col_min) if X.size else np.zeros(X.shape[1])
        self.col_scale = np.where(rng > 0, 1.0 / np.where(rng > 0, rng, 1.0), 0.0)
        scaled = (X - self.col_min) * self.col_scale
        max_norm = float(np.sqrt((scaled**2).sum(axis=1)).max()) if X.size else 0.0
        self.row_div = max_norm if max_norm > 0 else 1.0
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.col_min is None:
            raise ValueError("scaler is not fit")
        X = np.asarray(X, dtype=float)
        return (X - self.col_min) * self.col_scale / self.row_div

    def to_dict(self) -> dict:
        return {
            "col_min": np.asarray(self.col_min).tolist(),
            "col_scale": np.asarray(self.col_scale).tolist(),
            "row_div": self.row_div,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        s = cls()
        s.col_min = np.asarray(d["col_min"], dtype=float)
        s.col_scale = np.asarray(d["col_scale"], dtype=float)
        s.row_div = float(d["row_div"])
        return s


class LabelScaler:
    """Column min-max of label values to [0, 1]; constant columns go to 0."""

    def __init__(self):
        self.col_min = None
        self.col_scale = None

    def fit(self, Y: np.ndarray) -> "LabelScaler":
        Y = np.asarray(Y, dtype=float)
        self.col_min = Y.min(axis=0) if Y.size else np.zeros(Y.shape[1])
        rng = (Y.max(axis=0) - self.col_min) if Y.size else np.zeros(Y.shape[1])
        self.col_scale = np.where(rng > 0, 1.0 / np.where(rng > 0, rng, 1.0), 0.0)
        return self

    def transform(self, Y: np.ndarray) -> np.ndarray:
        if self.col_min is None:
            raise ValueError("scaler is not fit")
        return (np.asarray(Y, dtype=float) - self.col_min) * self.col_scale

    def to_dict(self) -> dict:
        return {
            "col_min": np.asarray(self.col_min).tolist(),
            "col_scale": np.asarray(self.col_scale).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelScaler":
        s = cls()
        s.col_min = np.asarray(d["col_min"], dtype=float)
        s.col_scale = np.asarray(d["col_scale"], dtype=float)
        return s


def normalize_features(ds: Dataset) -> Dataset:
    """Scale features with statistics fit on this dataset itself.

    For a train/test pair, fit a FeatureScaler on the train split and
    transform both; this convenience covers the single-dataset case.
    """
    scaler = FeatureScaler().fit(ds.X)
    return replace(ds, X=scaler.transform(ds.X))


def scale_labels_unit(ds: Dataset) -> Dataset:
    """Min-max scale each label column to [0, 1] (regression tasks only)."""
    if ds.task is not TaskKind.MULTILABEL_REGRESSION:
        raise ValueError("scale_labels_unit applies to multi-label regression only")
    scaler = LabelScaler().fit(ds.Y)
    return replace(ds, Y=scaler.transform(ds.Y))


def make_split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic train/test split with partial labeling of the train part.

    Returns (train, test). The train dataset keeps every train row; rows not
    selected as labeled get an all-False mask. Multi-class tasks reject
    missing_label_fraction > 0: a partially observed one-hot row is not a
    valid observation.
    """
    if ds.task is TaskKind.MULTICLASS and spec.missing_label_fraction > 0:
        raise ValueError("missing labels are a multi-label protocol; invalid for multi-class")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(ds.n)
    n_train = int(round(spec.train_fraction * ds.n))
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])

    n_labeled = math.ceil(spec.labeled_fraction_of_train * n_train)
    if n_labeled == 0:
        raise ValueError("split yields zero labeled samples")
    labeled_pos = rng.permutation(n_train)[:n_labeled]

    train = ds.subset(train_idx)
    mask = np.zeros_like(train.mask)
    mask[labeled_pos] = train.mask[labeled_pos]

    if spec.missing_label_fraction > 0:
        obs_rows, obs_cols = np.nonzero(mask)
        n_drop = int(round(spec.missing_label_fraction * obs_rows.size))
        drop = rng.choice(obs_rows.size, size=n_drop, replace=False)
        mask[obs_rows[drop], obs_cols[drop]] = False

    train = Dataset(train.X, train.Y, mask, ds.task)
    return train, ds.subset(test_idx)


def split_labeled(ds: Dataset) -> tuple[Dataset, Dataset]:
    """Split into (labeled, unlabeled) by whether any label entry is observed."""
    lab = ds.mask.any(axis=1)
    return ds.subset(np.flatnonzero(lab)), ds.subset(np.flatnonzero(~lab))
