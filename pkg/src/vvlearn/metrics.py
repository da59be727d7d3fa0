"""Prediction rules and evaluation metrics.

predict turns raw scores into task-shaped outputs; the metrics mirror the
reporting conventions of the experiment harness: classification error for
multi-class, averaged Hamming loss for multi-label classification, and a
per-sample-residual-norm error for regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vvlearn.data import TaskKind


@dataclass(frozen=True)
class EvalResult:
    metric_name: str
    mean: float
    std: float
    per_run: list[float] = field(default_factory=list)


def predict(W: np.ndarray, phi_x: np.ndarray, task: TaskKind) -> np.ndarray:
    """Scores W^T phi(x) turned into predictions.

    Multi-class: one-hot at the argmax score, ties to the lowest index.
    Multi-label classification: entrywise indicator of score > 0.5 (strict).
    Multi-label regression: the raw scores.
    Accepts a single feature vector or a stack of rows.
    """
    phi_x = np.asarray(phi_x, dtype=float)
    single = phi_x.ndim == 1
    scores = np.atleast_2d(phi_x) @ np.asarray(W, dtype=float)
    if task is TaskKind.MULTICLASS:
        out = np.zeros_like(scores)
        out[np.arange(scores.shape[0]), np.argmax(scores, axis=1)] = 1.0
    elif task is TaskKind.MULTILABEL_CLASSIFICATION:
        out = (scores > 0.5).astype(float)
    else:
        out = scores
    return out[0] if single else out


def mc_error(preds: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax class differs; expects one-hot rows."""
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if preds.shape != labels.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(np.argmax(preds, axis=1) != np.argmax(labels, axis=1)))


def hamming_loss(preds: np.ndarray, labels: np.ndarray) -> float:
    """Mean entrywise disagreement of two binary matrices."""
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if preds.shape != labels.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(preds != labels))


def rmse(preds: np.ndarray, labels: np.ndarray) -> float:
    """Sum of per-sample Euclidean residual norms divided by n_t * K.

    This divides by n_t * K rather than taking a square root of a mean;
    unconventional, but it is the convention the experiment tables use, so
    it is kept verbatim for comparability.
    """
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if preds.shape != labels.shape:
        raise ValueError("shape mismatch")
    n, K = preds.shape
    norms = np.sqrt(((preds - labels) ** 2).sum(axis=1))
    return float(norms.sum() / (n * K))


def aggregate(per_run, metric_name: str = "metric") -> EvalResult:
    """Mean and population standard deviation over repetition values."""
    per_run = [float(v) for v in per_run]
    if not per_run:
        raise ValueError("aggregate needs at least one value")
    arr = np.asarray(per_run)
    return EvalResult(
        metric_name=metric_name,
        mean=float(arr.mean()),
        std=float(arr.std()),
        per_run=per_run,
    )


def metric_for_task(task: TaskKind):
    """The evaluation metric the experiment protocol uses for each task."""
    if task is TaskKind.MULTICLASS:
        return mc_error
    if task is TaskKind.MULTILABEL_CLASSIFICATION:
        return hamming_loss
    return rmse
