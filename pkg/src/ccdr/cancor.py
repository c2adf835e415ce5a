"""Unconstrained canonical correlation fit and dimensionality tests.

Directions are extracted from the whitened kernel
    D = W S_xp pinv(S_pp) S_px W,      W = S_xx^{-1/2},
whose eigenvalues are the squared sample canonical correlations between the
predictors and the spline features of the response. Predictor directions are
beta_i = W eta_i; feature directions follow in closed form.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import ConfigError
from .moments import (DEFAULT_RANK_TOL, MomentSet, StandardizedData, inv_sqrt,
                      moments, pinv_threshold, sym_eigen)

# Correlations below this are numerically indistinguishable from zero;
# their feature directions are filled by Gram-Schmidt instead of the
# closed form (which would divide by ~0).
GAMMA_FLOOR = 1e-8


@dataclass
class CancorFit:
    """Canonical correlations and direction pairs, strongest first.

    beta columns are normalized to beta' S_xx beta = 1, alpha columns to
    alpha' S_pp alpha = 1. For subset fits, `columns` maps the rows of beta
    back into the full predictor coordinate system.
    """

    gamma: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    K_hat: int | None = None
    test_trace: list | None = None
    columns: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    @property
    def q(self) -> int:
        return self.alpha.shape[0]

    @property
    def r(self) -> int:
        return self.gamma.shape[0]

    def beta_full(self, p_total: int) -> np.ndarray:
        """Embed beta into p_total coordinates (zeros off the subset)."""
        if self.columns is None:
            if self.p != p_total:
                raise ValueError("fit dimension disagrees with p_total")
            return self.beta
        out = np.zeros((p_total, self.r))
        out[np.asarray(self.columns, dtype=int)] = self.beta
        return out


@dataclass
class DimensionTest:
    k_hat: int
    rows: list = field(default_factory=list)


def _alpha_fillers(alpha, S_pp, n_missing):
    """Deterministic S_pp-orthonormal completion for zero-correlation pairs."""
    q = S_pp.shape[0]
    have = [alpha[:, j] for j in range(alpha.shape[1]) if np.any(alpha[:, j])]
    out = []
    for j in range(q):
        if len(out) == n_missing:
            break
        v = np.zeros(q)
        v[j] = 1.0
        for u in have + out:
            v = v - u * float(u @ (S_pp @ v))
        nrm = float(v @ (S_pp @ v))
        if nrm > 1e-12:
            out.append(v / np.sqrt(nrm))
    return out


def fit_from_moments(Ms: MomentSet, rank_tol: float = DEFAULT_RANK_TOL) -> CancorFit:
    """Canonical correlation fit straight from a MomentSet."""
    p, q = Ms.p, Ms.q
    if q == 0:
        raise ConfigError("no spline features retained (q = 0)")
    W = inv_sqrt(Ms.S_xx, rank_tol)
    Spp_pinv, _ = pinv_threshold(Ms.S_pp, rank_tol)
    S_xp = Ms.S_px.T
    kernel = W @ S_xp @ Spp_pinv @ Ms.S_px @ W
    lam, eta = sym_eigen(0.5 * (kernel + kernel.T))

    r = min(p, q)
    lam = np.clip(lam[:r], 0.0, 1.0)
    gamma = np.sqrt(lam)

    beta = W @ eta[:, :r]
    for i in range(r):
        beta[:, i] /= np.sqrt(beta[:, i] @ (Ms.S_xx @ beta[:, i]))

    alpha = np.zeros((q, r))
    missing = []
    for i in range(r):
        if gamma[i] > GAMMA_FLOOR:
            alpha[:, i] = (Spp_pinv @ (Ms.S_px @ beta[:, i])) / gamma[i]
            alpha[:, i] /= np.sqrt(alpha[:, i] @ (Ms.S_pp @ alpha[:, i]))
        else:
            missing.append(i)
    if missing:
        fillers = _alpha_fillers(alpha, Ms.S_pp, len(missing))
        for i, v in zip(missing, fillers):
            alpha[:, i] = v

    return CancorFit(gamma=gamma, beta=beta, alpha=alpha)


def fit(x: StandardizedData, P, rank_tol: float = DEFAULT_RANK_TOL) -> CancorFit:
    """Canonical correlation fit between standardized predictors and P."""
    return fit_from_moments(moments(x, P), rank_tol)


def dimension_test(fit_result: CancorFit, n: int, p: int | None = None,
                   q: int | None = None, level: float = 0.05) -> DimensionTest:
    """Sequential tests for the number of nonzero canonical correlations.

    At each s the statistic n * sum_{i>s} gamma_i^2 is referred to a
    chi-square with (p - s)(q - s) degrees of freedom; the estimate is the
    smallest s that is not rejected, capped at min(p, q).
    """
    if not 0.0 < level < 1.0:
        raise ConfigError("test level must be in (0, 1)")
    p = fit_result.p if p is None else p
    q = fit_result.q if q is None else q
    r = fit_result.r
    gsq = fit_result.gamma ** 2

    rows = []
    k_hat = r
    for s in range(r):
        stat = float(n * gsq[s:].sum())
        df = (p - s) * (q - s)
        pval = float(chi2.sf(stat, df))
        rejected = pval < level
        rows.append({"s": s, "statistic": stat, "df": df,
                     "p_value": pval, "rejected": rejected})
        if not rejected:
            k_hat = s
            break
    result = DimensionTest(k_hat=min(k_hat, r), rows=rows)
    fit_result.K_hat = result.k_hat
    fit_result.test_trace = result.rows
    return result


def fit_on_subset(x: StandardizedData, columns, P,
                  rank_tol: float = DEFAULT_RANK_TOL) -> CancorFit:
    """Canonical correlation fit restricted to a predictor subset.

    Directions come back in subset coordinates; `columns` on the result
    maps them into the full coordinate system.
    """
    cols = np.asarray(columns, dtype=int)
    if cols.size == 0:
        raise ConfigError("predictor subset must be nonempty")
    sub = x.restrict(cols)
    out = fit_from_moments(moments(sub, P), rank_tol)
    out.columns = cols
    return out
