"""Partial singular value thresholding: the proximal operator of the
spectral tail-sum penalty tau * sum_{j > theta} sigma_j(W).

Two shrink ranges ship. TAIL_SHRINK shrinks sigma_j for j > theta and is the
actual minimizer of the prox objective 0.5 ||W - Q||_F^2 + tau *
sum_{j > theta} sigma_j(W) (the default). HEAD_SHRINK shrinks j <= theta
instead; it is kept selectable because the two ranges give genuinely
different operators and downstream users may want either convention.
A brute-force oracle verifies the minimizer on small matrices.
"""

from __future__ import annotations

import enum

import numpy as np

# singular values at or below this count as zero for rank decisions
RANK_TOL = 1e-12

_ORACLE_MAX_DIM = 6


class SvtMode(enum.Enum):
    TAIL_SHRINK = "tail"
    HEAD_SHRINK = "head"


def _validate(Q: np.ndarray, tau: float, theta: int) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2:
        raise ValueError("Q must be 2-D")
    if not np.all(np.isfinite(Q)):
        raise ValueError("Q contains non-finite entries")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if not 0 <= theta <= min(Q.shape):
        raise ValueError(f"theta must be in [0, {min(Q.shape)}], got {theta}")
    return Q


def partial_svt(Q: np.ndarray, tau: float, theta: int, mode: SvtMode = SvtMode.TAIL_SHRINK) -> np.ndarray:
    """Shrink one index range of Q's singular values by tau, flooring at 0.

    TAIL_SHRINK leaves sigma_1..sigma_theta intact and maps sigma_j to
    max(sigma_j - tau, 0) for j > theta; HEAD_SHRINK does the reverse split.
    tau = 0, an empty shrink range, or an all-zero tail return Q unchanged
    (exact copy, no SVD round-trip).
    """
    Q = _validate(Q, tau, theta)
    if tau == 0.0:
        return Q.copy()
    U, s, Vt = np.linalg.svd(Q, full_matrices=False)
    if mode is SvtMode.TAIL_SHRINK:
        if theta >= s.size or np.all(s[theta:] <= RANK_TOL):
            return Q.copy()
        rng = slice(theta, s.size)
    else:
        if theta == 0:
            return Q.copy()
        rng = slice(0, theta)
    s2 = s.copy()
    s2[rng] = np.maximum(s2[rng] - tau, 0.0)
    return (U * s2) @ Vt


def svt_objective(W: np.ndarray, Q: np.ndarray, tau: float, theta: int) -> float:
    """0.5 ||W - Q||_F^2 + tau * sum of W's singular values beyond theta."""
    W = np.asarray(W, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if W.shape != Q.shape:
        raise ValueError("W and Q shapes differ")
    s = np.linalg.svd(W, compute_uv=False)
    diff = W - Q
    return 0.5 * float((diff * diff).sum()) + tau * float(s[theta:].sum())


def prox_oracle(Q: np.ndarray, tau: float, theta: int, grid_resolution: int = 9) -> np.ndarray:
    """Brute-force minimizer of svt_objective over matrices sharing Q's
    singular vectors.

    Each singular value of the candidate ranges over a grid on [0, sigma_j]
    plus the two closed-form candidates sigma_j and max(sigma_j - tau, 0);
    all combinations are scored and the best reconstructed. Only small
    matrices (min(S, K) <= 6) are accepted.
    """
    Q = _validate(Q, tau, theta)
    if min(Q.shape) > _ORACLE_MAX_DIM:
        raise ValueError(f"prox_oracle accepts min(S, K) <= {_ORACLE_MAX_DIM}")
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    if tau == 0.0:
        return Q.copy()
    U, s, Vt = np.linalg.svd(Q, full_matrices=False)
    candidates = [
        np.unique(
            np.concatenate(
                [np.linspace(0.0, sj, grid_resolution), [sj, max(sj - tau, 0.0)]]
            )
        )
        for sj in s
    ]
    combos = np.stack(np.meshgrid(*candidates, indexing="ij"), axis=-1).reshape(-1, s.size)
    # candidates are nonnegative, so sorting descending gives the singular values
    tails = np.sort(combos, axis=1)[:, ::-1][:, theta:].sum(axis=1)
    objectives = 0.5 * ((combos - s) ** 2).sum(axis=1) + tau * tails
    best = combos[int(np.argmin(objectives))]
    return (U * best) @ Vt
