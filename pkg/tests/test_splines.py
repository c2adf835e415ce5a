import numpy as np
import pytest
from scipy.interpolate import BSpline

from ccdr import (ConfigError, ConstantResponseError, DegenerateResponseError,
                  SplineConfig, basis_values, design_matrix, evaluate_pi,
                  make_basis)
from oracle_utils import full_basis_recursive


class TestConfig:
    def test_defaults(self):
        cfg = SplineConfig()
        assert cfg.order == 3
        assert cfg.internal_knot_count == 4
        assert cfg.knot_placement == "quantile"
        assert cfg.n_basis == 7
        assert cfg.n_retained == 6

    def test_invalid(self):
        with pytest.raises(ConfigError):
            SplineConfig(order=0)
        with pytest.raises(ConfigError):
            SplineConfig(internal_knot_count=-1)
        with pytest.raises(ConfigError):
            SplineConfig(range=(1.0, 1.0))
        with pytest.raises(ConfigError):
            SplineConfig(knot_placement="magic")


class TestMakeBasis:
    def test_no_interior_knots_boundary_replication(self):
        y = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        basis = make_basis(y, SplineConfig(order=2, internal_knot_count=0))
        np.testing.assert_array_equal(basis.knots, [0.0, 0.0, 1.0, 1.0])

    def test_quantile_knots_match_sample_quantiles(self):
        rng = np.random.default_rng(7)
        y = rng.uniform(0.0, 1.0, 100)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        expected = np.quantile(y, [0.2, 0.4, 0.6, 0.8])
        np.testing.assert_allclose(basis.interior_knots, expected, atol=1e-12)
        # uniform sample, so the quantiles sit near the theoretical ones
        np.testing.assert_allclose(basis.interior_knots,
                                   [0.2, 0.4, 0.6, 0.8], atol=0.12)

    def test_uniform_knots(self):
        y = np.linspace(2.0, 6.0, 30)
        basis = make_basis(y, SplineConfig(order=2, internal_knot_count=3,
                                           knot_placement="uniform"))
        np.testing.assert_allclose(basis.interior_knots, [3.0, 4.0, 5.0])

    def test_constant_response(self):
        with pytest.raises(ConstantResponseError):
            make_basis(np.array([1.0, 1.0, 1.0]),
                       SplineConfig(internal_knot_count=1))

    def test_too_few_distinct_values(self):
        y = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
        with pytest.raises(DegenerateResponseError):
            make_basis(y, SplineConfig(order=2, internal_knot_count=2))

    def test_duplicate_quantiles_are_spread(self):
        # heavy atom at 0.5 makes several quantiles coincide
        y = np.concatenate([np.full(50, 0.5), np.linspace(0, 1, 13)])
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        interior = basis.interior_knots
        assert np.all(np.diff(interior) > 0)
        assert np.all((interior > basis.a) & (interior < basis.b))

    def test_explicit_range(self):
        y = np.array([0.2, 0.4, 0.9])
        basis = make_basis(y, SplineConfig(order=2, internal_knot_count=0,
                                           range=(0.0, 1.0)))
        assert basis.a == 0.0 and basis.b == 1.0

    def test_knot_vector_shape_and_monotonicity(self):
        rng = np.random.default_rng(3)
        y = rng.normal(size=60)
        cfg = SplineConfig(order=3, internal_knot_count=4)
        basis = make_basis(y, cfg)
        assert basis.knots.shape == (2 * cfg.order + cfg.internal_knot_count,)
        assert np.all(np.diff(basis.knots) >= 0)
        np.testing.assert_array_equal(basis.knots[:3], basis.a)
        np.testing.assert_array_equal(basis.knots[-3:], basis.b)


class TestEvaluate:
    def test_linear_retained_function(self):
        y = np.array([0.0, 0.5, 1.0])
        basis = make_basis(y, SplineConfig(order=2, internal_knot_count=0))
        np.testing.assert_allclose(evaluate_pi(basis, 0.0), [1.0])
        np.testing.assert_allclose(evaluate_pi(basis, 1.0), [0.0])
        np.testing.assert_allclose(evaluate_pi(basis, 0.25), [0.75])

    def test_against_recursive_oracle_single_knot(self):
        y = np.linspace(0.0, 1.0, 11)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=1,
                                           knot_placement="uniform"))
        np.testing.assert_allclose(basis.interior_knots, [0.5])
        got = basis_values(basis, 0.5)
        want = full_basis_recursive(basis.knots, 3, 0.5)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_partition_of_unity(self):
        rng = np.random.default_rng(11)
        y = rng.normal(size=200)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        pts = rng.uniform(basis.a, basis.b, 1000)
        sums = basis_values(basis, pts).sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)
        # endpoints included
        np.testing.assert_allclose(
            basis_values(basis, np.array([basis.a, basis.b])).sum(axis=1),
            1.0, atol=1e-12)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(12)
        y = rng.uniform(size=80)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        vals = basis_values(basis, rng.uniform(0, 1, 500))
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)

    def test_local_support_exact_zeros(self):
        y = np.linspace(0.0, 1.0, 50)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4,
                                           knot_placement="uniform"))
        t, m = basis.knots, 3
        pts = np.linspace(0.0, 1.0, 401)
        vals = basis_values(basis, pts)
        for i in range(basis.n_basis):
            lo, hi = t[i], t[i + m]
            outside = (pts < lo) | (pts > hi)
            assert np.all(vals[outside, i] == 0.0)

    def test_out_of_range_clamped(self):
        y = np.linspace(0.0, 1.0, 20)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=2))
        np.testing.assert_allclose(evaluate_pi(basis, -5.0),
                                   evaluate_pi(basis, 0.0))
        np.testing.assert_allclose(evaluate_pi(basis, 7.0),
                                   evaluate_pi(basis, 1.0))


class TestDesignMatrix:
    def test_single_row(self):
        y = np.linspace(0.0, 1.0, 12)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=2))
        M = design_matrix(basis, [0.3])
        assert M.shape == (1, basis.n_retained)
        np.testing.assert_allclose(M[0], evaluate_pi(basis, 0.3))

    def test_row_sums_of_full_matrix(self):
        rng = np.random.default_rng(5)
        y = rng.normal(size=40)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=3))
        full = basis_values(basis, y)
        np.testing.assert_allclose(full.sum(axis=1), 1.0, atol=1e-12)

    def test_against_recursive_oracle_matrix(self):
        rng = np.random.default_rng(42)
        y = rng.uniform(0.0, 1.0, 50)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        got = basis_values(basis, y)
        want = np.array([full_basis_recursive(basis.knots, 3, yi) for yi in y])
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_against_scipy(self):
        rng = np.random.default_rng(8)
        y = rng.normal(size=120)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        pts = np.sort(rng.uniform(basis.a, basis.b, 300))
        got = basis_values(basis, pts)
        want = BSpline.design_matrix(pts, basis.knots, 2).toarray()
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_retained_full_column_rank(self):
        rng = np.random.default_rng(9)
        y = rng.uniform(0.0, 1.0, 60)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        M = design_matrix(basis, y)
        assert np.linalg.matrix_rank(M) == basis.n_retained
