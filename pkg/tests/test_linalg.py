#!/usr/bin/env python3
"""
Tests for the dense matrix kernels and the Jacobi spectral routines

Usage:
    pytest tests/test_linalg.py
    pytest tests/test_linalg.py -m property
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.core import linalg
from src.core.errors import NoConvergence, NonFinite, NotSymmetric, ShapeMismatch, ZeroRow
from src.core.linalg import (
    as_matrix,
    frobenius_norm,
    jacobi_svd,
    nearest_orthogonal,
    normalize_rows_with_scales,
    row_normalize,
    row_softmax,
    row_sum_norm,
    singular_extremes,
    spectral_norm,
    symmetric_eigen_extremes,
)
from tests.test_utils import MatrixGenerator, finite_floats, matrices, seeds

# =============================================================================
# UNIT TESTS - Norms and validation
# =============================================================================

@pytest.mark.unit
class TestFrobeniusNorm:
    """Frobenius and row-sum norms"""

    def test_identity(self):
        assert frobenius_norm(np.eye(2)) == pytest.approx(1.41421356, abs=1e-8)

    def test_zeros(self):
        assert frobenius_norm(np.zeros((3, 3))) == 0.0

    def test_by_hand(self):
        assert frobenius_norm(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(5.47722558, abs=1e-8)

    def test_row_sum_norm(self):
        assert row_sum_norm(np.array([[1.0, -2.0], [0.5, 0.5]])) == 3.0


@pytest.mark.unit
class TestAsMatrix:
    """Input validation"""

    def test_vector_becomes_row(self):
        assert as_matrix([1.0, 2.0, 3.0]).shape == (1, 3)

    def test_nan_rejected(self):
        with pytest.raises(NonFinite):
            as_matrix([[1.0, np.nan]])

    def test_inf_rejected(self):
        with pytest.raises(NonFinite):
            as_matrix([[np.inf]])

    def test_empty_rejected(self):
        with pytest.raises(ShapeMismatch):
            as_matrix(np.zeros((0, 3)))

# =============================================================================
# UNIT TESTS - Softmax and row normalization
# =============================================================================

@pytest.mark.unit
class TestRowSoftmax:
    """Row-wise softmax"""

    def test_equal_scores(self):
        np.testing.assert_allclose(row_softmax(np.zeros((1, 2))), [[0.5, 0.5]], atol=1e-12)

    def test_one_zero(self):
        np.testing.assert_allclose(row_softmax(np.array([[1.0, 0.0]])),
                                   [[0.73105858, 0.26894142]], atol=1e-8)

    @pytest.mark.parametrize("c", [-50.0, 0.0, 3.0, 1e4])
    def test_constant_row(self, c):
        np.testing.assert_allclose(row_softmax(np.full((1, 3), c)), [[1 / 3] * 3], atol=1e-12)

    def test_large_scores_do_not_overflow(self):
        out = row_softmax(np.array([[1000.0, 0.0], [-1000.0, 1000.0]]))
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [[1.0, 0.0], [0.0, 1.0]], atol=1e-12)

    @pytest.mark.property
    @given(matrices(), finite_floats)
    def test_rows_positive_and_shift_invariant(self, m, shift):
        out = row_softmax(m)
        assert out.shape == m.shape
        assert np.all(out > 0)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(row_softmax(m + shift), out, atol=1e-12)


@pytest.mark.unit
class TestRowNormalize:
    """Normalization-only LayerNorm"""

    def test_three_four_five(self):
        np.testing.assert_allclose(row_normalize(np.array([[3.0, 4.0]])), [[0.6, 0.8]], atol=1e-12)

    def test_idempotent_on_unit_rows(self, unit_rows):
        np.testing.assert_allclose(row_normalize(unit_rows), unit_rows, atol=1e-12)

    def test_zero_row(self):
        with pytest.raises(ZeroRow) as exc_info:
            row_normalize(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert exc_info.value.row == 1

    def test_below_eps_is_zero_row(self):
        with pytest.raises(ZeroRow):
            row_normalize(np.array([[1e-13, 0.0]]))

    def test_scales_form_diagonal(self, rng):
        m = rng.normal(size=(4, 3))
        y, scales = normalize_rows_with_scales(m)
        np.testing.assert_allclose(np.diag(scales) @ m, y, atol=1e-12)
        np.testing.assert_allclose(scales, 1.0 / np.linalg.norm(m, axis=1), rtol=1e-12)

    @pytest.mark.property
    @given(seeds, st.integers(1, 6), st.integers(1, 6))
    def test_unit_rows(self, seed, rows, cols):
        m = np.random.default_rng(seed).normal(size=(rows, cols))
        pytest.assert_unit_rows(row_normalize(m))

# =============================================================================
# UNIT TESTS - Singular values
# =============================================================================

@pytest.mark.unit
class TestSingularExtremes:
    """One-sided Jacobi SVD"""

    @pytest.mark.parametrize("m, expected", [
        (np.eye(3), (1.0, 1.0)),
        (np.diag([1.0, 3.0]), (1.0, 3.0)),
        (np.array([[0.0, 2.0], [1.0, 0.0]]), (1.0, 2.0)),
    ])
    def test_examples(self, m, expected):
        s_min, s_max = singular_extremes(m)
        assert s_min == pytest.approx(expected[0], rel=1e-12)
        assert s_max == pytest.approx(expected[1], rel=1e-12)

    def test_known_spectrum(self, rng):
        m = MatrixGenerator.with_singular_values(rng, [0.1, 2.0, 5.0])
        s_min, s_max = singular_extremes(m)
        assert s_min == pytest.approx(0.1, rel=1e-9)
        assert s_max == pytest.approx(5.0, rel=1e-9)

    def test_spectral_norm_is_sigma_max(self, rng):
        m = rng.normal(size=(4, 6))
        assert spectral_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-9)

    @pytest.mark.parametrize("shape", [(5, 3), (3, 5), (4, 4), (1, 4), (4, 1)])
    def test_reconstruction(self, rng, shape):
        m = rng.normal(size=shape)
        u, s, vt = jacobi_svd(m)
        np.testing.assert_allclose(u @ np.diag(s) @ vt, m, atol=1e-10)
        assert np.all(np.diff(s) <= 0)

    def test_zero_matrix(self):
        assert singular_extremes(np.zeros((2, 3))) == (0.0, 0.0)

    def test_iteration_cap(self, mocker):
        mocker.patch.object(linalg, "MAX_SWEEPS", 0)
        with pytest.raises(NoConvergence):
            singular_extremes(np.eye(2))

    @pytest.mark.property
    @given(matrices())
    def test_matches_reference(self, m):
        s_min, s_max = singular_extremes(m)
        reference = np.linalg.svd(m, compute_uv=False)
        tol = 1e-9 * max(1.0, reference[0])
        assert s_min <= s_max
        assert abs(s_max - reference[0]) <= tol
        assert abs(s_min - reference[-1]) <= tol

    @pytest.mark.property
    @given(seeds, st.integers(1, 4), st.integers(1, 5), st.integers(0, 3))
    def test_frobenius_sandwich(self, seed, n, m, extra):
        """||A||_F sigma_min(B) <= ||AB||_F <= ||A||_F sigma_max(B) for B with p >= m"""
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(n, m))
        b = rng.normal(size=(m, m + extra))
        s_min, s_max = singular_extremes(b)
        prod, a_frob = frobenius_norm(a @ b), frobenius_norm(a)
        slack = 1e-9 * max(1.0, prod)
        assert prod >= a_frob * s_min - slack
        assert prod <= a_frob * s_max + slack


@pytest.mark.unit
class TestNearestOrthogonal:
    """Polar factor"""

    def test_orthogonal_output(self, rng):
        q = nearest_orthogonal(rng.normal(size=(5, 5)))
        np.testing.assert_allclose(q.T @ q, np.eye(5), atol=1e-12)

    def test_orthogonal_input_unchanged(self, rng):
        q = MatrixGenerator.orthogonal(rng, 4)
        np.testing.assert_allclose(nearest_orthogonal(q), q, atol=1e-12)

    def test_rectangular_rejected(self, rng):
        with pytest.raises(ShapeMismatch):
            nearest_orthogonal(rng.normal(size=(3, 2)))

    def test_rank_deficient_rejected(self):
        with pytest.raises(ShapeMismatch):
            nearest_orthogonal(np.array([[1.0, 1.0], [1.0, 1.0]]))

# =============================================================================
# UNIT TESTS - Symmetric eigenvalues
# =============================================================================

@pytest.mark.unit
class TestSymmetricEigenExtremes:
    """Cyclic Jacobi on symmetric matrices"""

    @pytest.mark.parametrize("m, expected", [
        (np.eye(3), (1.0, 1.0)),
        (np.diag([2.0, -1.0]), (-1.0, 2.0)),
        (np.array([[0.0, 1.0], [1.0, 0.0]]), (-1.0, 1.0)),
    ])
    def test_examples(self, m, expected):
        lo, hi = symmetric_eigen_extremes(m)
        assert lo == pytest.approx(expected[0], abs=1e-12)
        assert hi == pytest.approx(expected[1], abs=1e-12)

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            symmetric_eigen_extremes(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_not_square(self):
        with pytest.raises(ShapeMismatch):
            symmetric_eigen_extremes(np.ones((2, 3)))

    def test_single_entry(self):
        assert symmetric_eigen_extremes(np.array([[-4.0]])) == (-4.0, -4.0)

    @pytest.mark.property
    @given(matrices())
    def test_matches_reference(self, m):
        k = min(m.shape)
        sym = 0.5 * (m[:k, :k] + m[:k, :k].T)
        lo, hi = symmetric_eigen_extremes(sym)
        reference = np.linalg.eigvalsh(sym)
        tol = 1e-9 * max(1.0, float(np.max(np.abs(reference))))
        assert abs(lo - reference[0]) <= tol
        assert abs(hi - reference[-1]) <= tol
