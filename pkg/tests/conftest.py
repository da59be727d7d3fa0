"""Shared test fixtures: small synthetic datasets."""

import numpy as np
import pytest

from vvlearn.data import Dataset, TaskKind


def make_two_blob(n=40, d=2, gap=4.0, scale=0.3, seed=0):
    """Two well-separated Gaussian blobs, one-hot 2-class labels.

    With gap=4 and scale=0.3 a margin >= 1 is attainable by a linear
    separator after normalization.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    lo = rng.normal(-gap / 2, scale, (half, d))
    hi = rng.normal(gap / 2, scale, (n - half, d))
    X = np.vstack([lo, hi])
    Y = np.zeros((n, 2))
    Y[:half, 0] = 1.0
    Y[half:, 1] = 1.0
    mask = np.ones_like(Y, dtype=bool)
    return Dataset(X, Y, mask, TaskKind.MULTICLASS)


def make_mc_dataset(n, d, K, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    labels = rng.integers(0, K, n)
    labels[:K] = np.arange(K)  # every class appears
    Y = np.eye(K)[labels]
    return Dataset(X, Y, np.ones_like(Y, dtype=bool), TaskKind.MULTICLASS)


def make_mlc_dataset(n, d, K, seed=0, missing=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    Y = (rng.random((n, K)) < 0.5).astype(float)
    mask = rng.random((n, K)) >= missing
    mask[0] = True  # keep at least one fully observed row
    return Dataset(X, Y, mask, TaskKind.MULTILABEL_CLASSIFICATION)


def make_mlr_dataset(n, d, K, seed=0, missing=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    Y = rng.normal(size=(n, K))
    mask = rng.random((n, K)) >= missing
    mask[0] = True
    return Dataset(X, Y, mask, TaskKind.MULTILABEL_REGRESSION)


@pytest.fixture
def two_blob():
    return make_two_blob()
