"""Spectral tail-sum diagnostics and the threshold balance heuristic.

Tail sums of a nonincreasing spectrum (Gram eigenvalues, or singular values
of a weight matrix) quantify how much capacity lies beyond a truncation
index theta; the balance heuristic picks theta where theta*r/(4 L^2)
crosses the tail sum.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

_SYM_TOL = 1e-8
_PSD_TOL = -1e-8
# tail mass below this fraction of the total counts as numerically zero
_RANK_FRACTION = 1e-10


def _suffix_sums(values: np.ndarray) -> np.ndarray:
    """tail[theta] = sum of values beyond the first theta entries; tail[-1] = 0."""
    rev = np.cumsum(values[::-1])[::-1]
    return np.concatenate([rev, [0.0]])


def _numerical_rank_theta(tail_sums: np.ndarray) -> int:
    total = tail_sums[0]
    return int(np.argmax(tail_sums <= _RANK_FRACTION * max(total, 1.0)))


@dataclass(frozen=True)
class SpectrumReport:
    """A nonincreasing spectrum with its suffix sums.

    tail_sums[theta] is the sum of values strictly beyond index theta
    (1-based counting of kept values), so tail_sums[0] is the total and
    tail_sums[len(values)] is 0. tail_sums_squared holds the same suffix
    sums of the squared values. suggested_theta comes from the balance
    heuristic when (r, L) were supplied to the constructor and otherwise
    falls back to the numerical rank (smallest theta whose tail is below
    1e-10 of the total).
    """

    values: np.ndarray
    tail_sums: np.ndarray
    tail_sums_squared: np.ndarray
    suggested_theta: int

    def to_csv(self, path_or_file) -> None:
        """Write rows theta,value,tail_sum; row theta carries the theta-th
        largest value (empty at theta = 0) and the mass beyond theta."""
        buf = io.StringIO()
        buf.write("theta,value,tail_sum\n")
        for theta in range(len(self.tail_sums)):
            v = repr(float(self.values[theta - 1])) if theta >= 1 else ""
            buf.write(f"{theta},{v},{float(self.tail_sums[theta])!r}\n")
        if hasattr(path_or_file, "write"):
            path_or_file.write(buf.getvalue())
        else:
            with open(path_or_file, "w", encoding="utf-8") as fh:
                fh.write(buf.getvalue())


def _make_report(values: np.ndarray, r: float | None, L_lipschitz: float | None) -> SpectrumReport:
    tails = _suffix_sums(values)
    if r is not None and L_lipschitz is not None:
        theta = suggest_theta(values, r, L_lipschitz)
    else:
        theta = _numerical_rank_theta(tails)
    return SpectrumReport(
        values=values,
        tail_sums=tails,
        tail_sums_squared=_suffix_sums(values**2),
        suggested_theta=theta,
    )


def eigen_tail_sums(gram: np.ndarray, r: float | None = None, L_lipschitz: float | None = None) -> SpectrumReport:
    """Eigenvalue tail sums of a normalized Gram matrix.

    The input must be symmetric and PSD up to -1e-8; tiny negative
    eigenvalues are clipped to zero.
    """
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be square")
    if not np.allclose(gram, gram.T, atol=_SYM_TOL, rtol=0.0):
        raise ValueError("gram matrix is not symmetric")
    eig = np.linalg.eigvalsh(gram)
    if eig.min(initial=0.0) < _PSD_TOL:
        raise ValueError(f"gram matrix is not PSD (min eigenvalue {eig.min()})")
    values = np.maximum(eig[::-1], 0.0)
    return _make_report(values, r, L_lipschitz)


def singular_tail_sums(W: np.ndarray, r: float | None = None, L_lipschitz: float | None = None) -> SpectrumReport:
    """Singular-value tail sums of a weight matrix, plain and squared."""
    W = np.asarray(W, dtype=float)
    values = np.linalg.svd(W, compute_uv=False) if W.size else np.zeros(0)
    return _make_report(values, r, L_lipschitz)


def suggest_theta(values: np.ndarray, r: float, L_lipschitz: float) -> int:
    """Threshold where theta*r/(4 L^2) best balances the tail sum.

    Scans every theta in [0, len(values)] and returns the minimizer of
    |theta*r/(4 L^2) - tail_sums[theta]|, smallest theta on ties.
    """
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    if L_lipschitz <= 0:
        raise ValueError(f"L_lipschitz must be > 0, got {L_lipschitz}")
    values = np.asarray(values, dtype=float)
    if values.size and (np.any(values < 0) or np.any(np.diff(values) > 0)):
        raise ValueError("values must be nonincreasing and nonnegative")
    tails = _suffix_sums(values)
    thetas = np.arange(tails.size)
    gap = np.abs(thetas * r / (4.0 * L_lipschitz**2) - tails)
    return int(np.argmin(gap))
