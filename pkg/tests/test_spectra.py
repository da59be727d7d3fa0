"""Tail-sum reports and the threshold heuristic."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vvlearn.features import gram, identity_map
from vvlearn.spectra import eigen_tail_sums, singular_tail_sums, suggest_theta


class TestEigenTailSums:
    def test_arithmetic(self):
        G = np.diag([0.5, 0.3, 0.2])
        rep = eigen_tail_sums(G)
        np.testing.assert_allclose(rep.values, [0.5, 0.3, 0.2])
        np.testing.assert_allclose(rep.tail_sums, [1.0, 0.5, 0.2, 0.0])

    def test_rank_one(self):
        v = np.array([1.0, 2.0, 3.0])
        G = np.outer(v, v)
        rep = eigen_tail_sums(G)
        assert rep.tail_sums[1] <= 1e-10

    def test_identity_over_n(self):
        n = 6
        rep = eigen_tail_sums(np.eye(n) / n)
        np.testing.assert_allclose(rep.values, np.full(n, 1.0 / n))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="not symmetric"):
            eigen_tail_sums(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_non_psd_rejected(self):
        with pytest.raises(ValueError, match="PSD"):
            eigen_tail_sums(np.diag([1.0, -0.5]))

    def test_rank_rho_gram(self):
        # a rank-rho linear map gives a Gram whose tail vanishes at rho
        rng = np.random.default_rng(0)
        rho = 2
        X = rng.normal(size=(15, rho)) @ rng.normal(size=(rho, 6))
        rep = eigen_tail_sums(gram(identity_map(6), X))
        assert rep.tail_sums[rho] <= 1e-10


class TestSingularTailSums:
    def test_zero_matrix(self):
        rep = singular_tail_sums(np.zeros((3, 2)))
        np.testing.assert_array_equal(rep.tail_sums, np.zeros(3))
        np.testing.assert_array_equal(rep.tail_sums_squared, np.zeros(3))

    def test_diag_squared(self):
        rep = singular_tail_sums(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(rep.tail_sums_squared, [5.0, 1.0, 0.0])
        np.testing.assert_allclose(rep.tail_sums, [3.0, 1.0, 0.0])

    def test_orthogonal_full_theta(self):
        Q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(4, 4)))
        rep = singular_tail_sums(Q)
        assert rep.tail_sums[4] == 0.0
        np.testing.assert_allclose(rep.values, np.ones(4))


class TestSuffixSumIdentity:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0, 10, allow_nan=False, width=32), min_size=1, max_size=10))
    def test_difference_recovers_values(self, raw):
        values = np.sort(np.array(raw, dtype=float))[::-1]
        rep = singular_tail_sums(np.diag(values) if values.size else np.zeros((0, 0)))
        vals, tails = rep.values, rep.tail_sums
        for theta in range(len(vals)):
            assert tails[theta] - tails[theta + 1] == pytest.approx(vals[theta], abs=1e-9)
        assert tails[-1] == 0.0


def _exhaustive_theta(values, r, L):
    tails = np.concatenate([np.cumsum(values[::-1])[::-1], [0.0]])
    diffs = [abs(theta * r / (4 * L * L) - tails[theta]) for theta in range(len(values) + 1)]
    return int(np.argmin(diffs))


class TestSuggestTheta:
    def test_finite_rank(self):
        assert suggest_theta(np.array([1.0, 0.0, 0.0]), r=1e-6, L_lipschitz=1.0) == 1

    def test_all_zero(self):
        assert suggest_theta(np.zeros(4), r=0.5, L_lipschitz=1.0) == 0

    def test_geometric_decay(self):
        values = 2.0 ** -np.arange(10)
        got = suggest_theta(values, r=0.1, L_lipschitz=1.0)
        assert got == _exhaustive_theta(values, 0.1, 1.0)

    def test_parameter_errors(self):
        with pytest.raises(ValueError, match="r must be"):
            suggest_theta(np.array([1.0]), r=0.0, L_lipschitz=1.0)
        with pytest.raises(ValueError, match="L_lipschitz"):
            suggest_theta(np.array([1.0]), r=1.0, L_lipschitz=0.0)

    def test_rejects_increasing(self):
        with pytest.raises(ValueError, match="nonincreasing"):
            suggest_theta(np.array([1.0, 2.0]), r=1.0, L_lipschitz=1.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(0, 5, allow_nan=False, width=32), min_size=1, max_size=12),
        st.floats(1e-4, 10, allow_nan=False),
        st.floats(0.1, 5, allow_nan=False),
    )
    def test_matches_exhaustive_scan(self, raw, r, L):
        values = np.sort(np.array(raw, dtype=float))[::-1]
        assert suggest_theta(values, r, L) == _exhaustive_theta(values, r, L)

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.floats(0.015625, 5, allow_nan=False, width=32), min_size=1, max_size=8),
        st.integers(1, 5),
    )
    def test_invariant_under_zero_padding(self, raw, pad):
        values = np.sort(np.array(raw, dtype=float))[::-1]
        padded = np.concatenate([values, np.zeros(pad)])
        assert suggest_theta(values, 0.3, 1.0) == suggest_theta(padded, 0.3, 1.0)


class TestCsvExport:
    def test_layout(self):
        rep = singular_tail_sums(np.diag([2.0, 1.0]))
        buf = io.StringIO()
        rep.to_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "theta,value,tail_sum"
        assert len(lines) == 4  # theta = 0, 1, 2 rows
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == ""
        assert float(first[2]) == 3.0
