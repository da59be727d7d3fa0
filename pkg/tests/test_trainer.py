"""Gradients, the Adadelta schedule, and the training loop."""

import io
import math

import numpy as np
import pytest

from vvlearn.data import Dataset, TaskKind, split_labeled
from vvlearn.features import apply_map, build_rff, identity_map
from vvlearn.graph import build_graph
from vvlearn.losses import LossKind
from vvlearn.metrics import mc_error, predict
from vvlearn.prox import SvtMode
from vvlearn.trainer import (
    AdadeltaState,
    Hyperparams,
    adadelta_step,
    grad_g,
    loss_for_task,
    objective_value,
    train,
)

from conftest import make_mlr_dataset, make_two_blob


class TestGradG:
    def test_inactive_hinge_reduces_to_ridge(self):
        rng = np.random.default_rng(0)
        W = np.zeros((2, 2))
        # strongly separated scores: margins stay >= 1 at W chosen below
        W[0, 0] = 5.0
        W[1, 1] = 5.0
        Phi = np.eye(2)
        Y = np.eye(2)
        mask = np.ones_like(Y, dtype=bool)
        g = grad_g(W, (Phi, Y, mask), LossKind.MULTICLASS_HINGE, 0.01, 0.0, None)
        np.testing.assert_allclose(g, 2 * 0.01 * W)

    def test_single_mlr_sample(self):
        rng = np.random.default_rng(1)
        phi = rng.normal(size=3)
        W = rng.normal(size=(3, 2))
        y = rng.normal(size=2)
        g = grad_g(
            W,
            (phi[None, :], y[None, :], np.ones((1, 2), dtype=bool)),
            LossKind.MULTILABEL_SQUARED,
            0.0,
            0.0,
            None,
        )
        np.testing.assert_allclose(g, 2.0 * np.outer(phi, phi @ W - y), atol=1e-12)

    def test_finite_differences_full_objective(self):
        # MLR path: grad_g on the full labeled batch equals the gradient of
        # objective_value with tau_S = 0
        rng = np.random.default_rng(2)
        ds = make_mlr_dataset(8, 3, 2, seed=2, missing=0.2)
        fmap = identity_map(3)
        g = build_graph(ds.X, fmap, k=3)
        hp = Hyperparams(tau_A=0.01, tau_I=0.02, tau_S=0.0)
        W = rng.normal(size=(3, 2))
        lab = ds.labeled_indices()
        batch = (ds.X[lab], ds.Y[lab], ds.mask[lab])
        grad = grad_g(W, batch, LossKind.MULTILABEL_SQUARED, hp.tau_A, hp.tau_I, g.M)
        h = 1e-6
        fd = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                Wp, Wm = W.copy(), W.copy()
                Wp[i, j] += h
                Wm[i, j] -= h
                fd[i, j] = (
                    objective_value(Wp, ds, fmap, g.M, LossKind.MULTILABEL_SQUARED, hp)
                    - objective_value(Wm, ds, fmap, g.M, LossKind.MULTILABEL_SQUARED, hp)
                ) / (2 * h)
        rel = np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-12)
        assert rel < 1e-4

    def test_empty_batch(self):
        with pytest.raises(ValueError, match="empty batch"):
            grad_g(
                np.zeros((2, 2)),
                (np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 2), dtype=bool)),
                LossKind.MULTILABEL_SQUARED,
                0.0,
                0.0,
                None,
            )

    def test_tau_i_needs_manifold(self):
        with pytest.raises(ValueError, match="manifold"):
            grad_g(
                np.zeros((1, 2)),
                (np.ones((1, 1)), np.ones((1, 2)), np.ones((1, 2), dtype=bool)),
                LossKind.MULTILABEL_SQUARED,
                0.0,
                0.5,
                None,
            )


class TestAdadeltaStep:
    def test_hand_arithmetic(self):
        eta, state = adadelta_step(AdadeltaState(), 4.0, xi=0.95, eps=1e-6)
        assert state.G == pytest.approx(0.2, abs=1e-15)
        assert eta == pytest.approx(math.sqrt(1e-6 / 0.200001), rel=1e-12)
        assert state.M == pytest.approx(0.05 * (eta * eta * 4.0), rel=1e-12)

    def test_zero_gradient(self):
        start = AdadeltaState(G=1.0, M=0.5)
        eta, state = adadelta_step(start, 0.0, xi=0.9, eps=1e-6)
        assert eta == pytest.approx(math.sqrt((0.5 + 1e-6) / (0.9 + 1e-6)))
        assert state.G == pytest.approx(0.9)
        assert state.M == pytest.approx(0.45)
        assert math.isfinite(eta)

    def test_large_eps_limit(self):
        eta, _ = adadelta_step(AdadeltaState(), 4.0, xi=0.95, eps=1e12)
        assert eta == pytest.approx(1.0, rel=1e-10)

    def test_negative_grad_norm_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            adadelta_step(AdadeltaState(), -1.0, 0.95, 1e-6)

    def test_state_never_negative(self):
        state = AdadeltaState()
        rng = np.random.default_rng(3)
        for _ in range(100):
            eta, state = adadelta_step(state, float(rng.uniform(0, 10)), 0.95, 1e-6)
            assert state.G >= 0 and state.M >= 0 and eta > 0


class TestTrain:
    def test_zero_iterations_zero_matrix(self, two_blob):
        labeled, unlabeled = split_labeled(two_blob)
        hp = Hyperparams(max_iters=0)
        w = train(labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp)
        np.testing.assert_array_equal(w.W, np.zeros((2, 2)))

    def test_determinism(self, two_blob):
        labeled, unlabeled = split_labeled(two_blob)
        hp = Hyperparams(tau_A=1e-6, max_iters=50, batch_size=8, seed=5, early_stop=False)
        a = train(labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp)
        b = train(labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp)
        np.testing.assert_array_equal(a.W, b.W)

    def test_separable_blobs_linear(self, two_blob):
        labeled, unlabeled = split_labeled(two_blob)
        hp = Hyperparams(tau_A=1e-8, max_iters=2000, seed=0)
        w = train(labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp)
        preds = predict(w.W, two_blob.X, TaskKind.MULTICLASS)
        assert mc_error(preds, two_blob.Y) == 0.0

    def test_degeneration_bit_identity(self, two_blob):
        # tau_I = tau_S = 0 with a graph and theta set must match the plain
        # ridge run bit for bit
        labeled, unlabeled = split_labeled(two_blob)
        fmap = build_rff(2, 20, 1.0, seed=0)
        graph = build_graph(two_blob.X, fmap, k=5)
        hp_plain = Hyperparams(tau_A=1e-6, max_iters=100, batch_size=8, seed=7, early_stop=False)
        hp_zero = Hyperparams(
            tau_A=1e-6,
            tau_I=0.0,
            tau_S=0.0,
            theta=2,
            max_iters=100,
            batch_size=8,
            seed=7,
            early_stop=False,
        )
        a = train(labeled, unlabeled, fmap, None, LossKind.MULTICLASS_HINGE, hp_plain)
        b = train(labeled, unlabeled, fmap, graph, LossKind.MULTICLASS_HINGE, hp_zero)
        np.testing.assert_array_equal(a.W, b.W)

    def test_full_theta_prox_is_identity(self, two_blob):
        # tau_S > 0 with theta = min(S, K): empty tail, exact no-op prox
        labeled, unlabeled = split_labeled(two_blob)
        hp_ref = Hyperparams(tau_A=1e-6, max_iters=80, batch_size=8, seed=3, early_stop=False)
        hp_full = Hyperparams(
            tau_A=1e-6,
            tau_S=0.5,
            theta=2,
            max_iters=80,
            batch_size=8,
            seed=3,
            early_stop=False,
        )
        a = train(labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp_ref)
        b = train(labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp_full)
        np.testing.assert_array_equal(a.W, b.W)

    def test_tail_pressure(self, two_blob):
        # with TailShrink, every post-prox tail singular value is bounded by
        # the pre-prox one
        labeled, unlabeled = split_labeled(two_blob)
        hp = Hyperparams(
            tau_A=1e-6, tau_S=0.1, theta=1, max_iters=60, batch_size=8, seed=1, early_stop=False
        )
        seen = []

        def snoop(t, W, eta):
            seen.append(np.linalg.svd(W, compute_uv=False))

        train(
            labeled,
            unlabeled,
            identity_map(2),
            None,
            LossKind.MULTICLASS_HINGE,
            hp,
            on_iteration=snoop,
        )
        assert len(seen) == 60
        assert all(s.min() >= -1e-12 for s in seen)

    def test_no_labeled_data(self):
        X = np.zeros((3, 2))
        Y = np.zeros((3, 2))
        mask = np.zeros_like(Y, dtype=bool)
        ds = Dataset(X, Y, mask, TaskKind.MULTILABEL_REGRESSION)
        with pytest.raises(ValueError, match="no labeled data"):
            train(ds, None, identity_map(2), None, LossKind.MULTILABEL_SQUARED, Hyperparams())

    def test_theta_exceeds_rank(self, two_blob):
        labeled, _ = split_labeled(two_blob)
        hp = Hyperparams(theta=3)
        with pytest.raises(ValueError, match="theta"):
            train(labeled, None, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp)

    def test_graph_size_checked(self, two_blob):
        labeled, unlabeled = split_labeled(two_blob)
        wrong = build_graph(two_blob.X[:10], identity_map(2), k=3)
        hp = Hyperparams(tau_I=1e-6)
        with pytest.raises(ValueError):
            train(labeled, unlabeled, identity_map(2), wrong, LossKind.MULTICLASS_HINGE, hp)

    def test_trace_output(self, two_blob):
        labeled, unlabeled = split_labeled(two_blob)
        hp = Hyperparams(tau_A=1e-6, max_iters=5, batch_size=8, seed=0, early_stop=False)
        buf = io.StringIO()
        train(
            labeled, unlabeled, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp, trace=buf
        )
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "iteration,eta,objective,tail_sum"
        assert len(lines) == 6
        parts = lines[1].split(",")
        assert parts[0] == "1" and float(parts[1]) > 0

    def test_early_stop_shortens_run(self, two_blob):
        labeled, unlabeled = split_labeled(two_blob)
        count = [0]

        def bump(t, W, eta):
            count[0] += 1

        hp = Hyperparams(tau_A=1e-6, max_iters=2000, seed=0, early_stop=True)
        train(
            labeled,
            unlabeled,
            identity_map(2),
            None,
            LossKind.MULTICLASS_HINGE,
            hp,
            on_iteration=bump,
        )
        assert count[0] < 2000


class TestObjectiveValue:
    def test_zero_weights_mlr(self):
        ds = make_mlr_dataset(6, 3, 2, seed=4, missing=0.3)
        hp = Hyperparams(tau_A=0.0)
        value = objective_value(
            np.zeros((3, 2)), ds, identity_map(3), None, LossKind.MULTILABEL_SQUARED, hp
        )
        lab = ds.labeled_indices()
        expect = float(np.mean([(ds.Y[i][ds.mask[i]] ** 2).sum() for i in lab]))
        assert value == pytest.approx(expect)

    def test_perfect_predictor_no_penalties(self):
        X = np.eye(2)
        Y = np.array([[1.0, 0.0], [0.0, 1.0]])
        ds = Dataset(X, Y, np.ones_like(Y, dtype=bool), TaskKind.MULTILABEL_REGRESSION)
        hp = Hyperparams(tau_A=0.0)
        W = Y.copy()
        assert objective_value(W, ds, identity_map(2), None, LossKind.MULTILABEL_SQUARED, hp) == 0.0

    def test_descent_over_first_iterations(self, two_blob):
        # full batch: objective decreases in at least 45 of the first 50 steps
        labeled, unlabeled = split_labeled(two_blob)
        hp = Hyperparams(tau_A=1e-6, batch_size=40, max_iters=50, seed=0, early_stop=False)
        values = []

        def record(t, W, eta):
            values.append(
                objective_value(
                    W, two_blob, identity_map(2), None, LossKind.MULTICLASS_HINGE, hp
                )
            )

        train(
            labeled,
            unlabeled,
            identity_map(2),
            None,
            LossKind.MULTICLASS_HINGE,
            hp,
            on_iteration=record,
        )
        drops = sum(1 for a, b in zip(values, values[1:]) if b <= a + 1e-12)
        assert drops >= 44  # 45 of 50 counting the first step from W = 0

    def test_loss_for_task(self):
        assert loss_for_task(TaskKind.MULTICLASS) is LossKind.MULTICLASS_HINGE
        assert loss_for_task(TaskKind.MULTILABEL_CLASSIFICATION) is LossKind.MULTILABEL_SQUARED
        assert loss_for_task(TaskKind.MULTILABEL_REGRESSION) is LossKind.MULTILABEL_SQUARED
