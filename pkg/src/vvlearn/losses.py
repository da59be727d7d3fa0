"""Per-sample losses and (sub)gradients with respect to the weight matrix.

Multi-class uses the one-hot margin hinge; multi-label (classification or
regression) uses the squared Euclidean loss with an observation mask.
Gradients are taken with respect to W for scores = W^T phi(x), so each
per-sample gradient is the rank-1 matrix phi(x) r^T for a residual-like r.
"""

from __future__ import annotations

import enum

import numpy as np


class LossKind(enum.Enum):
    MULTICLASS_HINGE = "multiclass_hinge"
    MULTILABEL_SQUARED = "multilabel_squared"


def _check_one_hot(y: np.ndarray) -> int:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or not (np.all((y == 0.0) | (y == 1.0)) and y.sum() == 1.0):
        raise ValueError("y must be one-hot")
    if y.size < 2:
        raise ValueError("multi-class margins need K >= 2")
    return int(np.argmax(y))


def mc_margin(scores: np.ndarray, y: np.ndarray) -> float:
    """True-class score minus the best competitor score."""
    t = _check_one_hot(y)
    scores = np.asarray(scores, dtype=float)
    others = np.delete(scores, t)
    return float(scores[t] - others.max())


def mc_hinge_loss(scores: np.ndarray, y: np.ndarray) -> float:
    """Hinge on the multi-class margin: max(0, 1 - margin)."""
    return max(0.0, 1.0 - mc_margin(scores, y))


def mc_hinge_subgrad(phi_x: np.ndarray, scores: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Subgradient of the hinge loss w.r.t. W.

    Zero when the margin is >= 1 (including exactly 1, the kink); otherwise
    phi(x) (y' - y)^T where y' is the one-hot best competitor. Competitor
    ties break to the lowest class index.
    """
    t = _check_one_hot(y)
    phi_x = np.asarray(phi_x, dtype=float)
    scores = np.asarray(scores, dtype=float)
    masked = scores.copy()
    masked[t] = -np.inf
    c = int(np.argmax(masked))
    if scores[t] - scores[c] >= 1.0:
        return np.zeros((phi_x.size, scores.size))
    direction = np.zeros(scores.size)
    direction[c] = 1.0
    direction[t] = -1.0
    return np.outer(phi_x, direction)


def ml_sq_loss(pred: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    """Masked squared loss sum_k mask_k (pred_k - y_k)^2."""
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    r = (pred - y) * mask
    return float(r @ r)


def ml_sq_grad(phi_x: np.ndarray, pred: np.ndarray, y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gradient of ml_sq_loss w.r.t. W: 2 phi(x) (masked residual)^T."""
    phi_x = np.asarray(phi_x, dtype=float)
    r = (np.asarray(pred, dtype=float) - np.asarray(y, dtype=float)) * np.asarray(mask, dtype=bool)
    return 2.0 * np.outer(phi_x, r)
