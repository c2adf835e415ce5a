"""L1-constrained direction estimation and the decreasing-t path.

For direction i the problem is

    maximize    a' S_px b
    subject to  a' S_pp a = 1,  b' S_xx b = 1,  |b|_1 <= t,
                a' S_pp a_l = 0,  b' S_xx b_l = 0   for earlier directions l.

The L1 constraint is smoothed by splitting b into nonnegative parts, after
which a dense SQP step (scipy's SLSQP) solves each subproblem. The path
starts at t0 = |b_unconstrained|_1 and decreases t by delta_t (floored at 1,
so the last step may be shorter), warm starting every solve from the
previous solution, and stops once the achieved correlation falls below a
Fisher-transform lower confidence limit of the unconstrained correlation.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .errors import ConfigError, InfeasibleProblemError
from .moments import MomentSet, pinv_threshold


@dataclass(frozen=True)
class PathConfig:
    alpha_level: float = 0.005
    delta_t: float = 0.05
    constraint_tol: float = 1e-8
    objective_tol: float = 1e-9
    max_iterations: int = 500

    def __post_init__(self):
        if not 0.0 < self.alpha_level < 1.0:
            raise ConfigError("alpha_level must be in (0, 1)")
        if self.delta_t <= 0.0:
            raise ConfigError("delta_t must be positive")


@dataclass
class ConstrainedDirection:
    beta_c: np.ndarray
    alpha_c: np.ndarray
    gamma_c: float
    t_selected: float
    index: int


@dataclass
class PathStep:
    t: float
    gamma: float
    beta: np.ndarray
    converged: bool


@dataclass
class PathTrace:
    t0: float
    limit: float
    steps: list[PathStep] = field(default_factory=list)
    stop_reason: str = ""


class SolveResult(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray
    gamma: float
    converged: bool


def lower_conf_limit(gamma_hat: float, n: int, alpha_level: float = 0.005) -> float:
    """Fisher-transform lower confidence limit of a correlation."""
    if n <= 3:
        raise ConfigError("confidence limit needs n > 3")
    if not 0.0 < alpha_level < 1.0:
        raise ConfigError("alpha_level must be in (0, 1)")
    g = min(float(gamma_hat), 1.0 - 1e-12)
    tau = np.arctanh(g) - norm.ppf(1.0 - alpha_level) / np.sqrt(n - 3)
    return float(np.tanh(tau))


def _l1(v) -> float:
    return float(np.abs(v).sum())


def _orth_unit(beta, S_xx, prior_betas):
    """S_xx-orthogonalize against priors and scale to unit S_xx-norm."""
    b = np.asarray(beta, dtype=float).copy()
    if prior_betas:
        B = np.column_stack(prior_betas)
        SB = S_xx @ B
        coef = np.linalg.solve(B.T @ SB, SB.T @ b)
        b -= B @ coef
    nrm2 = float(b @ (S_xx @ b))
    if nrm2 <= 1e-18:
        return None
    return b / np.sqrt(nrm2)


def _feasible_beta(beta0, t, S_xx, prior_betas):
    """Nearest-in-spirit feasible start: soft-threshold until |b|_1 <= t.

    The threshold level is the smallest one on a fixed grid for which the
    orthogonalized, renormalized vector meets the L1 bound. Returns None if
    no level works (the constraint set may be empty).
    """
    b = _orth_unit(beta0, S_xx, prior_betas)
    if b is not None and _l1(b) <= t:
        return b
    top = float(np.max(np.abs(beta0)))
    if top <= 0.0:
        return None
    for theta in np.linspace(0.0, top, 512, endpoint=False)[1:]:
        shrunk = np.sign(beta0) * np.maximum(np.abs(beta0) - theta, 0.0)
        b = _orth_unit(shrunk, S_xx, prior_betas)
        if b is not None and _l1(b) <= t:
            return b
    return None


def _best_alpha(Ms: MomentSet, Spp_pinv, beta, prior_alphas):
    """Closed-form feature direction maximizing a'S_px b for fixed b."""
    c = Ms.S_px @ beta
    a = Spp_pinv @ c
    if prior_alphas:
        A = np.column_stack(prior_alphas)
        coef = np.linalg.solve(A.T @ (Ms.S_pp @ A), A.T @ c)
        a -= A @ coef
    nrm2 = float(a @ (Ms.S_pp @ a))
    if nrm2 <= 1e-18:
        return None, 0.0
    a = a / np.sqrt(nrm2)
    val = float(a @ c)
    if val < 0.0:
        a, val = -a, -val
    return a, val


def constraint_residuals(alpha, beta, t, Ms: MomentSet,
                         prior_alphas=(), prior_betas=()):
    """All constraint violations of a candidate pair."""
    res = {
        "alpha_norm": abs(float(alpha @ (Ms.S_pp @ alpha)) - 1.0),
        "beta_norm": abs(float(beta @ (Ms.S_xx @ beta)) - 1.0),
        "l1_excess": max(0.0, _l1(beta) - t),
        "alpha_orth": max((abs(float(a @ (Ms.S_pp @ alpha)))
                           for a in prior_alphas), default=0.0),
        "beta_orth": max((abs(float(b @ (Ms.S_xx @ beta)))
                          for b in prior_betas), default=0.0),
    }
    return res


def _max_residual(alpha, beta, t, Ms, prior_alphas, prior_betas):
    return max(constraint_residuals(
        alpha, beta, t, Ms, prior_alphas, prior_betas).values())


def _solve_nlp(Ms: MomentSet, t, prior_alphas, prior_betas,
               alpha0, beta0, maxiter, ftol):
    q, p = Ms.q, Ms.p
    S_pp, S_xx, S_px = Ms.S_pp, Ms.S_xx, Ms.S_px

    def unpack(w):
        return w[:q], w[q:q + p] - w[q + p:]

    def fun(w):
        a, b = unpack(w)
        return -float(a @ (S_px @ b))

    def grad(w):
        a, b = unpack(w)
        gb = -(S_px.T @ a)
        return np.concatenate([-(S_px @ b), gb, -gb])

    def beta_norm(w):
        _, b = unpack(w)
        return float(b @ (S_xx @ b)) - 1.0

    def beta_norm_jac(w):
        _, b = unpack(w)
        g = 2.0 * (S_xx @ b)
        return np.concatenate([np.zeros(q), g, -g])

    cons = [
        {"type": "eq",
         "fun": lambda w: float(w[:q] @ (S_pp @ w[:q])) - 1.0,
         "jac": lambda w: np.concatenate([2.0 * (S_pp @ w[:q]),
                                          np.zeros(2 * p)])},
        {"type": "eq", "fun": beta_norm, "jac": beta_norm_jac},
        {"type": "ineq",
         "fun": lambda w: t - float(w[q:].sum()),
         "jac": lambda w: np.concatenate([np.zeros(q), -np.ones(2 * p)])},
    ]
    for ap in prior_alphas:
        v = S_pp @ ap
        cons.append({
            "type": "eq",
            "fun": lambda w, v=v: float(v @ w[:q]),
            "jac": lambda w, v=v: np.concatenate([v, np.zeros(2 * p)])})
    for bp in prior_betas:
        v = S_xx @ bp
        cons.append({
            "type": "eq",
            "fun": lambda w, v=v: float(v @ w[q:q + p]) - float(v @ w[q + p:]),
            "jac": lambda w, v=v: np.concatenate([np.zeros(q), v, -v])})

    bounds = [(None, None)] * q + [(0.0, None)] * (2 * p)
    w0 = np.concatenate([alpha0,
                         np.clip(beta0, 0.0, None),
                         np.clip(-beta0, 0.0, None)])
    res = minimize(fun, w0, jac=grad, method="SLSQP", bounds=bounds,
                   constraints=cons, options={"maxiter": maxiter, "ftol": ftol})
    alpha, beta = unpack(res.x)
    return alpha, beta, res


def solve_constrained(i, Ms: MomentSet, t, prior, warm_start,
                      config: PathConfig | None = None) -> SolveResult:
    """One constrained solve at a fixed L1 bound t.

    `prior` holds the already-fixed ConstrainedDirection objects for
    directions 1..i-1; `warm_start` is an (alpha, beta) pair, projected to
    feasibility before the SQP iterations start. The best feasible iterate
    is always returned; `converged` reports whether the SQP step succeeded.
    """
    config = config or PathConfig()
    tol = config.constraint_tol
    if t < 1.0 - tol:
        raise InfeasibleProblemError(
            f"L1 bound {t} < 1 leaves no feasible direction")
    prior_alphas = [np.asarray(d.alpha_c, dtype=float) for d in prior]
    prior_betas = [np.asarray(d.beta_c, dtype=float) for d in prior]
    alpha0 = np.asarray(warm_start[0], dtype=float)
    beta0 = np.asarray(warm_start[1], dtype=float)
    Spp_pinv, _ = pinv_threshold(Ms.S_pp)

    beta_ws = _feasible_beta(beta0, t, Ms.S_xx, prior_betas)
    if beta_ws is None:
        g0 = float(alpha0 @ (Ms.S_px @ beta0))
        return SolveResult(alpha0, beta0, g0, False)
    alpha_ws, val_ws = _best_alpha(Ms, Spp_pinv, beta_ws, prior_alphas)
    if alpha_ws is None:
        return SolveResult(alpha0, beta_ws, 0.0, False)

    best_alpha, best_beta, best_val = alpha_ws, beta_ws, val_ws
    solver_ok = False

    ftol = min(1e-12, config.objective_tol)
    alpha_r, beta_r, res = _solve_nlp(
        Ms, t, prior_alphas, prior_betas, alpha_ws, beta_ws,
        config.max_iterations, ftol)
    if not res.success:
        alpha_r, beta_r, res = _solve_nlp(
            Ms, t, prior_alphas, prior_betas, alpha_ws, beta_ws,
            2 * config.max_iterations, ftol)

    # Closed-form alpha refresh; also the consistent way to report gamma.
    cand_alpha, cand_val = _best_alpha(Ms, Spp_pinv, beta_r, prior_alphas)
    if cand_alpha is None:
        cand_alpha, cand_val = alpha_r, float(alpha_r @ (Ms.S_px @ beta_r))
    if _max_residual(cand_alpha, beta_r, t, Ms, prior_alphas, prior_betas) <= tol:
        solver_ok = bool(res.success)
        if cand_val > best_val:
            best_alpha, best_beta, best_val = cand_alpha, beta_r, cand_val
    else:
        # Repair pass: re-impose the beta constraints exactly, keep only if
        # the L1 bound survives.
        beta_fix = _orth_unit(beta_r, Ms.S_xx, prior_betas)
        if beta_fix is not None and _l1(beta_fix) <= t + tol:
            a2, v2 = _best_alpha(Ms, Spp_pinv, beta_fix, prior_alphas)
            if a2 is not None and _max_residual(
                    a2, beta_fix, t, Ms, prior_alphas, prior_betas) <= tol:
                solver_ok = bool(res.success)
                if v2 > best_val:
                    best_alpha, best_beta, best_val = a2, beta_fix, v2

    return SolveResult(best_alpha, best_beta, best_val, solver_ok)


def run_path(i, Ms: MomentSet, unconstrained, prior, n,
             config: PathConfig | None = None):
    """Decreasing-t path with the confidence-limit stopping rule.

    `unconstrained` is the (alpha, beta, gamma) triple from the plain
    canonical correlation fit for direction i; the confidence limit is
    computed once from that gamma. Returns the selected ConstrainedDirection
    and the full PathTrace.
    """
    config = config or PathConfig()
    alpha_u, beta_u, gamma_u = unconstrained
    alpha_u = np.asarray(alpha_u, dtype=float)
    beta_u = np.asarray(beta_u, dtype=float)
    t0 = _l1(beta_u)
    limit = lower_conf_limit(gamma_u, n, config.alpha_level)
    trace = PathTrace(t0=t0, limit=limit)

    sol = solve_constrained(i, Ms, t0, prior, (alpha_u, beta_u), config)
    trace.steps.append(PathStep(t0, sol.gamma, sol.beta.copy(), sol.converged))
    best = ConstrainedDirection(beta_c=sol.beta, alpha_c=sol.alpha,
                                gamma_c=sol.gamma, t_selected=t0, index=i)
    if not sol.converged or sol.gamma < limit:
        trace.stop_reason = "below_limit_at_start"
        return best, trace

    t = t0
    while t > 1.0 + 1e-12:
        t_next = max(t - config.delta_t, 1.0)
        sol = solve_constrained(
            i, Ms, t_next, prior, (best.alpha_c, best.beta_c), config)
        trace.steps.append(
            PathStep(t_next, sol.gamma, sol.beta.copy(), sol.converged))
        if not sol.converged:
            trace.stop_reason = "solver_failure"
            return best, trace
        if sol.gamma < limit:
            trace.stop_reason = "below_limit"
            return best, trace
        best = ConstrainedDirection(beta_c=sol.beta, alpha_c=sol.alpha,
                                    gamma_c=sol.gamma, t_selected=t_next,
                                    index=i)
        t = t_next

    trace.stop_reason = "reached_t_floor"
    return best, trace
