import numpy as np
import pytest

from ccdr import (CancorFit, ConfigError, MomentSet, SplineConfig,
                  design_matrix, dimension_test, fit, fit_from_moments,
                  fit_on_subset, make_basis, moments, standardize)
from ccdr.studies import StudySpec, generate
from oracle_utils import cca_singular_values


def _fit_instance(seed, n=150, p=4, kn=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ rng.normal(size=p) + 0.5 * rng.standard_normal(n)
    x = standardize(X)
    basis = make_basis(y, SplineConfig(order=3, internal_knot_count=kn))
    P = design_matrix(basis, y)
    return x, P, moments(x, P)


class TestFit:
    def test_monotone_signal_near_one(self):
        # noiseless monotone response lies in the spline span, so the
        # leading correlation is essentially 1
        rng = np.random.default_rng(100)
        X = rng.standard_normal((200, 1))
        y = X[:, 0].copy()
        x = standardize(X)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        out = fit(x, design_matrix(basis, y))
        assert out.gamma[0] >= 0.99

    def test_pure_noise_small_leading_correlation(self):
        rng = np.random.default_rng(101)
        X = rng.standard_normal((500, 5))
        y = rng.standard_normal(500)
        x = standardize(X)
        basis = make_basis(y, SplineConfig(order=3, internal_knot_count=4))
        out = fit(x, design_matrix(basis, y))
        assert out.gamma[0] < 0.3

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_invariants(self, seed):
        x, P, Ms = _fit_instance(seed)
        out = fit_from_moments(Ms)
        g = out.gamma
        assert np.all(np.diff(g) <= 1e-10)
        assert np.all(g >= -1e-10) and np.all(g <= 1.0 + 1e-10)
        r = out.r
        for i in range(r):
            bi = out.beta[:, i]
            ai = out.alpha[:, i]
            np.testing.assert_allclose(bi @ (Ms.S_xx @ bi), 1.0, atol=1e-8)
            np.testing.assert_allclose(ai @ (Ms.S_pp @ ai), 1.0, atol=1e-8)
            np.testing.assert_allclose(ai @ (Ms.S_px @ bi), g[i], atol=1e-8)
            for j in range(i):
                assert abs(out.beta[:, j] @ (Ms.S_xx @ bi)) < 1e-8
                assert abs(out.alpha[:, j] @ (Ms.S_pp @ ai)) < 1e-8
                assert abs(out.alpha[:, j] @ (Ms.S_px @ bi)) < 1e-8
                assert abs(ai @ (Ms.S_px @ out.beta[:, j])) < 1e-8

    @pytest.mark.parametrize("seed", [10, 11, 12, 13, 14])
    def test_matches_svd_oracle(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((80, 3))
        y = X @ np.array([1.0, -0.5, 0.25]) + 0.3 * rng.standard_normal(80)
        x = standardize(X)
        basis = make_basis(y, SplineConfig(order=2, internal_knot_count=1))
        Ms = moments(x, design_matrix(basis, y))
        out = fit_from_moments(Ms)
        want = cca_singular_values(Ms.S_xx, Ms.S_pp, Ms.S_px)
        np.testing.assert_allclose(out.gamma, want[:out.r], atol=1e-8)

    @pytest.mark.parametrize("seed", [15, 16])
    def test_matches_centered_projector_route(self, seed):
        # same kernel, built directly: project whitened predictors onto the
        # span of the centered feature columns
        from ccdr import inv_sqrt, sym_eigen
        x, P, Ms = _fit_instance(seed, n=120, p=5)
        W = inv_sqrt(Ms.S_xx)
        Z = (x.X - x.X.mean(axis=0)) @ W
        Pc = P - P.mean(axis=0)
        proj = Pc @ np.linalg.lstsq(Pc, Z, rcond=None)[0]
        delta = Z.T @ proj / (x.n - 1)
        lam, eta = sym_eigen(0.5 * (delta + delta.T))
        f = fit_from_moments(Ms)
        np.testing.assert_allclose(np.sqrt(np.clip(lam[:f.r], 0.0, 1.0)),
                                   f.gamma, atol=1e-8)
        beta = W @ eta[:, :f.r]
        np.testing.assert_allclose(np.abs(beta), np.abs(f.beta), atol=1e-6)

    def test_divisor_invariance(self):
        x, P, Ms = _fit_instance(20, n=90)
        n = 90
        scaled = MomentSet(S_xx=Ms.S_xx * (n - 1) / n,
                           S_pp=Ms.S_pp * (n - 1) / n,
                           S_px=Ms.S_px * (n - 1) / n)
        a = fit_from_moments(Ms)
        b = fit_from_moments(scaled)
        np.testing.assert_allclose(a.gamma, b.gamma, atol=1e-8)
        # directions keep unit variance in their own metric, so they differ
        # only by the sqrt of the divisor ratio
        ratio = np.sqrt(n / (n - 1))
        np.testing.assert_allclose(a.beta * np.sign(a.beta[0]),
                                   b.beta * np.sign(b.beta[0]) / ratio,
                                   atol=1e-8)

    def test_column_permutation(self):
        rng = np.random.default_rng(22)
        X = rng.standard_normal((100, 5))
        y = X @ rng.normal(size=5) + 0.4 * rng.standard_normal(100)
        P = design_matrix(make_basis(y, SplineConfig()), y)
        perm = [3, 1, 4, 0, 2]
        a = fit(standardize(X), P)
        b = fit(standardize(X[:, perm]), P)
        np.testing.assert_allclose(a.gamma, b.gamma, atol=1e-10)
        np.testing.assert_allclose(np.abs(b.beta), np.abs(a.beta[perm]),
                                   atol=1e-8)

    def test_gamma_consistency_trend(self):
        # leading correlation approaches its large-sample value as n grows
        def gamma1(n, seed):
            spec = StudySpec(study=1, n=n, replicates=1, base_seed=seed)
            data = generate(spec, 0)
            x = standardize(data.x, data.names)
            P = design_matrix(make_basis(data.y, SplineConfig()), data.y)
            return fit(x, P).gamma[0]

        oracle = gamma1(100_000, 777)
        med = []
        for n in (60, 240, 960):
            errs = [abs(gamma1(n, s) - oracle) for s in range(20)]
            med.append(np.median(errs))
        assert med[0] > med[1] > med[2]

    def test_rejects_empty_feature_block(self):
        rng = np.random.default_rng(23)
        x = standardize(rng.standard_normal((30, 2)))
        with pytest.raises(ConfigError):
            fit(x, np.empty((30, 0)))


class TestDimensionTest:
    def test_all_zero_correlations(self):
        f = CancorFit(gamma=np.zeros(3), beta=np.eye(3), alpha=np.eye(3))
        res = dimension_test(f, n=100)
        assert res.k_hat == 0
        assert res.rows[0]["statistic"] == 0.0
        assert res.rows[0]["p_value"] == 1.0
        assert f.K_hat == 0

    def test_trace_contents(self):
        x, P, Ms = _fit_instance(30, n=200)
        f = fit_from_moments(Ms)
        res = dimension_test(f, n=200, level=0.05)
        for row in res.rows:
            s = row["s"]
            assert row["df"] == (f.p - s) * (f.q - s)
            want = 200 * float((f.gamma[s:] ** 2).sum())
            np.testing.assert_allclose(row["statistic"], want, rtol=1e-12)
        assert res.rows[-1]["rejected"] == (res.k_hat == f.r)

    def test_capped_at_min_pq(self):
        f = CancorFit(gamma=np.full(2, 0.9999), beta=np.eye(2),
                      alpha=np.eye(2))
        res = dimension_test(f, n=5000)
        assert res.k_hat == 2

    def test_study2_recovers_two_directions(self):
        hits = 0
        for rep in range(100):
            spec = StudySpec(study=2, n=400, replicates=1, base_seed=99)
            data = generate(spec, rep)
            x = standardize(data.x, data.names)
            P = design_matrix(make_basis(data.y, SplineConfig()), data.y)
            f = fit(x, P)
            if dimension_test(f, 400).k_hat == 2:
                hits += 1
        assert hits >= 80

    def test_invalid_level(self):
        f = CancorFit(gamma=np.zeros(2), beta=np.eye(2), alpha=np.eye(2))
        with pytest.raises(ConfigError):
            dimension_test(f, n=50, level=1.5)


class TestSubsetFit:
    def test_full_subset_matches_fit(self):
        x, P, Ms = _fit_instance(40)
        a = fit_from_moments(Ms)
        b = fit_on_subset(x, np.arange(x.p), P)
        np.testing.assert_allclose(a.gamma, b.gamma, atol=1e-10)
        np.testing.assert_allclose(a.beta, b.beta, atol=1e-8)

    def test_single_column_unit_direction(self):
        x, P, _ = _fit_instance(41)
        out = fit_on_subset(x, [2], P)
        assert out.beta.shape == (1, 1)
        np.testing.assert_allclose(np.abs(out.beta[0, 0]), 1.0, atol=1e-8)

    def test_embedding(self):
        x, P, _ = _fit_instance(42, p=5)
        out = fit_on_subset(x, [1, 3], P)
        full = out.beta_full(5)
        assert full.shape == (5, out.r)
        np.testing.assert_array_equal(full[[0, 2, 4]], 0.0)
        np.testing.assert_allclose(full[[1, 3]], out.beta)

    def test_empty_subset_rejected(self):
        x, P, _ = _fit_instance(43)
        with pytest.raises(ConfigError):
            fit_on_subset(x, [], P)
