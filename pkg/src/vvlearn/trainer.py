"""Mini-batch proximal gradient training with scalar Adadelta step sizes.

Each iteration samples a labeled batch, forms the gradient of the smooth
terms (averaged loss subgradient + 2 tau_A W + 2 tau_I M W), takes a step
W - eta * grad with eta from a scalar Adadelta rule, and applies partial
singular value thresholding with threshold eta * tau_S. W starts at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vvlearn.data import Dataset, TaskKind
from vvlearn.features import FeatureMap, apply_map
from vvlearn.graph import GraphLaplacian
from vvlearn.losses import LossKind
from vvlearn.prox import SvtMode, partial_svt


@dataclass(frozen=True)
class Hyperparams:
    """Penalty weights, prox threshold index, and optimizer settings.

    theta counts the singular values exempt from shrinking and must not
    exceed min(feature dim, K). Batches of size batch_size are drawn
    uniformly with replacement; batch_size >= n_labeled degenerates to full
    gradient descent with no randomness. Early stopping evaluates the full
    objective every eval_every iterations and stops after stall_patience
    consecutive evaluations that improve the best seen value by less than
    stall_tol relative.
    """

    tau_A: float = 1e-6
    tau_I: float = 0.0
    tau_S: float = 0.0
    theta: int = 0
    batch_size: int = 64
    max_iters: int = 2000
    xi: float = 0.95
    eps: float = 1e-6
    seed: int = 0
    svt_mode: SvtMode = SvtMode.TAIL_SHRINK
    early_stop: bool = True
    eval_every: int = 10
    stall_tol: float = 1e-7
    stall_patience: int = 50

    def __post_init__(self):
        if min(self.tau_A, self.tau_I, self.tau_S) < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must be in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")


@dataclass(frozen=True)
class AdadeltaState:
    """Decayed accumulators of squared gradient and squared update norms."""

    G: float = 0.0
    M: float = 0.0

    def __post_init__(self):
        if self.G < 0 or self.M < 0:
            raise ValueError("accumulators must be >= 0")


@dataclass(frozen=True)
class WeightMatrix:
    """Learned predictor h(x) = W^T phi(x)."""

    W: np.ndarray


def _stack_batch(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(batch, (list, tuple)) and len(batch) and isinstance(batch[0], (list, tuple)):
        phis, ys, masks = zip(*batch)
        return np.atleast_2d(np.asarray(phis, dtype=float)), np.atleast_2d(
            np.asarray(ys, dtype=float)
        ), np.atleast_2d(np.asarray(masks, dtype=bool))
    Phi, Y, mask = batch
    return (
        np.atleast_2d(np.asarray(Phi, dtype=float)),
        np.atleast_2d(np.asarray(Y, dtype=float)),
        np.atleast_2d(np.asarray(mask, dtype=bool)),
    )


def _hinge_margins(scores: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row (margin, true index, competitor index), ties to lowest index."""
    t = np.argmax(Y, axis=1)
    masked = scores.copy()
    masked[np.arange(scores.shape[0]), t] = -np.inf
    c = np.argmax(masked, axis=1)
    rows = np.arange(scores.shape[0])
    return scores[rows, t] - scores[rows, c], t, c


def _batch_loss_grad(W: np.ndarray, Phi: np.ndarray, Y: np.ndarray, mask: np.ndarray, loss: LossKind) -> np.ndarray:
    m = Phi.shape[0]
    scores = Phi @ W
    if loss is LossKind.MULTICLASS_HINGE:
        margins, t, c = _hinge_margins(scores, Y)
        active = margins < 1.0
        A = np.zeros_like(scores)
        rows = np.arange(m)[active]
        A[rows, c[active]] = 1.0
        A[rows, t[active]] = -1.0
        return Phi.T @ A / m
    residual = (scores - Y) * mask
    return 2.0 * Phi.T @ residual / m


def _batch_loss_value(W: np.ndarray, Phi: np.ndarray, Y: np.ndarray, mask: np.ndarray, loss: LossKind) -> float:
    scores = Phi @ W
    if loss is LossKind.MULTICLASS_HINGE:
        margins, _, _ = _hinge_margins(scores, Y)
        return float(np.maximum(0.0, 1.0 - margins).mean())
    residual = (scores - Y) * mask
    return float((residual * residual).sum() / Phi.shape[0])


def grad_g(
    W: np.ndarray,
    batch,
    loss: LossKind,
    tau_A: float,
    tau_I: float,
    M_manifold: np.ndarray | None,
) -> np.ndarray:
    """Gradient of the smooth objective terms on a batch.

    Averaged per-sample loss (sub)gradient + 2 tau_A W + 2 tau_I M W. The
    batch is (Phi, Y, mask) arrays or a list of per-sample triples.
    """
    Phi, Y, mask = _stack_batch(batch)
    if Phi.shape[0] == 0:
        raise ValueError("empty batch")
    W = np.asarray(W, dtype=float)
    G = _batch_loss_grad(W, Phi, Y, mask, loss)
    if tau_A != 0.0:
        G = G + 2.0 * tau_A * W
    if tau_I != 0.0:
        if M_manifold is None:
            raise ValueError("tau_I > 0 needs a manifold matrix")
        G = G + 2.0 * tau_I * (M_manifold @ W)
    return G


def adadelta_step(
    state: AdadeltaState, grad_norm_sq: float, xi: float, eps: float
) -> tuple[float, AdadeltaState]:
    """One scalar Adadelta update; returns (eta, new state).

    G accumulates squared gradient norms, eta = sqrt((M + eps)/(G + eps))
    with the updated G and the previous M, and M then accumulates the
    squared step norm eta^2 * grad_norm_sq.
    """
    if grad_norm_sq < 0:
        raise ValueError("grad_norm_sq must be >= 0")
    G = xi * state.G + (1.0 - xi) * grad_norm_sq
    eta = math.sqrt((state.M + eps) / (G + eps))
    M = xi * state.M + (1.0 - xi) * (eta * eta * grad_norm_sq)
    return eta, AdadeltaState(G=G, M=M)


def loss_for_task(task: TaskKind) -> LossKind:
    if task is TaskKind.MULTICLASS:
        return LossKind.MULTICLASS_HINGE
    return LossKind.MULTILABEL_SQUARED


def _tail_sum(W: np.ndarray, theta: int) -> float:
    s = np.linalg.svd(W, compute_uv=False)
    return float(s[theta:].sum())


def objective_value(
    W: np.ndarray,
    train_set: Dataset,
    fmap: FeatureMap,
    M_manifold: np.ndarray | None,
    loss: LossKind,
    hp: Hyperparams,
) -> float:
    """Full objective: mean labeled loss + tau_A ||W||_F^2 +
    tau_I trace(W^T M W) + tau_S * tail sum of singular values."""
    W = np.asarray(W, dtype=float)
    lab = train_set.labeled_indices()
    if lab.size == 0:
        raise ValueError("no labeled data")
    Phi = apply_map(fmap, train_set.X[lab])
    value = _batch_loss_value(W, Phi, train_set.Y[lab], train_set.mask[lab], loss)
    if hp.tau_A != 0.0:
        value += hp.tau_A * float((W * W).sum())
    if hp.tau_I != 0.0:
        if M_manifold is None:
            raise ValueError("tau_I > 0 needs a manifold matrix")
        value += hp.tau_I * float(np.einsum("sk,st,tk->", W, M_manifold, W))
    if hp.tau_S != 0.0:
        value += hp.tau_S * _tail_sum(W, hp.theta)
    return value


def train(
    train_set: Dataset,
    unlabeled: Dataset | None,
    fmap: FeatureMap,
    graph: GraphLaplacian | None,
    loss: LossKind,
    hp: Hyperparams,
    on_iteration=None,
    trace=None,
) -> WeightMatrix:
    """Run the proximal gradient loop and return the final weights.

    train_set supplies the labeled samples (rows with any observed label
    entry); unlabeled, when given, must be the same samples the graph was
    built over, jointly with the labeled ones. The trajectory is a pure
    function of (data, fmap, graph, hp): one RNG seeded by hp.seed drives
    batch sampling and nothing else.

    on_iteration(t, W, eta) is called after each update with the new W.
    trace, a writable file object, receives CSV rows
    iteration,eta,objective,tail_sum (header included).
    """
    lab = train_set.labeled_indices()
    if lab.size == 0:
        raise ValueError("no labeled data")
    n_lab = lab.size
    K = train_set.K
    S_feat = fmap.output_dim
    if hp.theta > min(S_feat, K):
        raise ValueError(f"theta must be <= min(feature dim, K) = {min(S_feat, K)}")
    if hp.tau_I > 0:
        if graph is None:
            raise ValueError("tau_I > 0 needs a graph")
        expected = train_set.n + (unlabeled.n if unlabeled is not None else 0)
        if graph.n_nodes != expected:
            raise ValueError(
                f"graph has {graph.n_nodes} nodes but labeled+unlabeled is {expected}"
            )
    M_manifold = graph.M if graph is not None else None

    Phi = apply_map(fmap, train_set.X[lab])
    Y = train_set.Y[lab]
    mask = train_set.mask[lab]

    W = np.zeros((S_feat, K))
    state = AdadeltaState()
    rng = np.random.default_rng(hp.seed)
    full_batch = hp.batch_size >= n_lab

    if trace is not None:
        trace.write("iteration,eta,objective,tail_sum\n")

    best = math.inf
    stall = 0
    for t in range(1, hp.max_iters + 1):
        idx = np.arange(n_lab) if full_batch else rng.integers(0, n_lab, size=hp.batch_size)
        G = grad_g(W, (Phi[idx], Y[idx], mask[idx]), loss, hp.tau_A, hp.tau_I, M_manifold)
        if not np.all(np.isfinite(G)):
            raise RuntimeError(f"non-finite gradient at iteration {t}; training aborted")
        eta, state = adadelta_step(state, float((G * G).sum()), hp.xi, hp.eps)
        Q = W - eta * G
        W = partial_svt(Q, eta * hp.tau_S, hp.theta, hp.svt_mode)
        if on_iteration is not None:
            on_iteration(t, W, eta)
        if trace is not None:
            obj = objective_value(W, train_set, fmap, M_manifold, loss, hp)
            trace.write(f"{t},{eta!r},{obj!r},{_tail_sum(W, hp.theta)!r}\n")
        if hp.early_stop and t % hp.eval_every == 0:
            obj = objective_value(W, train_set, fmap, M_manifold, loss, hp)
            if not math.isfinite(best) or obj < best - hp.stall_tol * max(abs(best), 1.0):
                best = obj
                stall = 0
            else:
                stall += 1
                if stall >= hp.stall_patience:
                    break
    return WeightMatrix(W=W)
