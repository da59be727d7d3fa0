"""Similarity graph over labeled and unlabeled samples, its Laplacian, and
the precomputed manifold matrix entering the gradient.

The manifold penalty on a weight matrix W is trace(W^T M W) with
M = Phi L Phi^T, where Phi stacks the feature-mapped samples columnwise and
L = D - S is the combinatorial Laplacian of the similarity graph built in
input space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vvlearn.features import FeatureMap, apply_map

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class GraphLaplacian:
    """Similarity matrix S, Laplacian L = D - S, and manifold matrix M."""

    S: np.ndarray
    L: np.ndarray
    M: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.S.shape[0]


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = (X**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    return np.maximum(d2, 0.0)


def knn_similarity(X: np.ndarray, k: int) -> np.ndarray:
    """Binary k-nearest-neighbor similarity, symmetrized by union.

    S_ij = 1 when j is among the k nearest Euclidean neighbors of i or i is
    among the k nearest of j. Distance ties break by lower index, so the
    result is deterministic.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    d2 = _pairwise_sq_dists(X)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    S = np.zeros((n, n))
    np.put_along_axis(S, order, 1.0, axis=1)
    S = np.maximum(S, S.T)
    np.fill_diagonal(S, 0.0)
    return S


def heat_kernel_similarity(X: np.ndarray, sigma_g: float) -> np.ndarray:
    """Dense heat-kernel similarity S_ij = exp(-||x_i - x_j||^2 / sigma_g^2)."""
    if sigma_g <= 0:
        raise ValueError(f"sigma_g must be > 0, got {sigma_g}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S = np.exp(-_pairwise_sq_dists(X) / sigma_g**2)
    S = (S + S.T) / 2.0
    np.fill_diagonal(S, 0.0)
    return S


def laplacian(S: np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian L = diag(row sums) - S; rejects asymmetric S."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    if not np.allclose(S, S.T, atol=_SYM_TOL, rtol=0.0):
        raise ValueError("similarity matrix is not symmetric")
    return np.diag(S.sum(axis=1)) - S


def manifold_matrix(Phi_all: np.ndarray, L: np.ndarray) -> np.ndarray:
    """M = Phi L Phi^T for column-stacked features Phi (feature dim x nodes)."""
    Phi_all = np.asarray(Phi_all, dtype=float)
    L = np.asarray(L, dtype=float)
    if Phi_all.shape[1] != L.shape[0]:
        raise ValueError(
            f"Phi_all has {Phi_all.shape[1]} columns but L is {L.shape[0]} x {L.shape[1]}"
        )
    M = Phi_all @ L @ Phi_all.T
    # exact symmetry matters downstream; kill accumulated rounding
    return (M + M.T) / 2.0


def build_graph(
    X_input: np.ndarray,
    fmap: FeatureMap,
    k: int = 10,
    heat_sigma: float | None = None,
) -> GraphLaplacian:
    """Build S, L, and M over all n+u samples in one call.

    The similarity graph lives in input space; the manifold matrix uses the
    feature-mapped samples. k is clamped to n-1 so small folds stay valid;
    with a single sample the graph is empty and M = 0.
    """
    X_input = np.atleast_2d(np.asarray(X_input, dtype=float))
    n = X_input.shape[0]
    if heat_sigma is not None:
        S = heat_kernel_similarity(X_input, heat_sigma)
    elif n == 1:
        S = np.zeros((1, 1))
    else:
        S = knn_similarity(X_input, min(k, n - 1))
    L = laplacian(S)
    Phi = apply_map(fmap, X_input)
    return GraphLaplacian(S=S, L=L, M=manifold_matrix(Phi.T, L))
