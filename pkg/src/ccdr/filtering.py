"""Variable filtering of constrained directions and re-estimation.

For each direction the scan keeps the d largest coefficients in absolute
value, projects the truncated vector back onto the constraint set (in the
S_xx inner product, restricted to the kept coordinates), scores the
resulting correlation with BIC(d) = n log(1 - r_d^2) + d log(n), and keeps
the minimizing support. The union of supports is then refit without the L1
constraint, giving the final directions.
"""

from dataclasses import dataclass, field

import numpy as np

from .cancor import CancorFit, fit_on_subset
from .constrained import ConstrainedDirection
from .errors import DegenerateFitError
from .moments import MomentSet, StandardizedData, pinv_threshold

ZERO_NORM_TOL = 1e-10


@dataclass
class FilterRecord:
    d: int
    support: np.ndarray
    beta_p: np.ndarray
    r: float
    bic: float
    zeroed: bool


@dataclass
class FilterTrace:
    index: int
    n: int
    records: list[FilterRecord] = field(default_factory=list)
    d0: int = 0
    support: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


@dataclass
class FinalFit:
    beta_f: np.ndarray
    reported: np.ndarray
    support_union: np.ndarray
    final_corr: np.ndarray
    traces: list[FilterTrace]
    refit: CancorFit

    @property
    def k(self) -> int:
        return self.beta_f.shape[1]


def threshold(beta_c, d: int) -> np.ndarray:
    """Indices of the d largest |coefficients|, ties to the lower index."""
    beta_c = np.asarray(beta_c, dtype=float)
    if not 0 <= d <= beta_c.shape[0]:
        raise ValueError(f"support size {d} outside [0, {beta_c.shape[0]}]")
    order = np.argsort(-np.abs(beta_c), kind="stable")
    return np.sort(order[:d])


def project(i, support, beta_c, prior, S_xx):
    """Project the truncated direction onto the filter constraint set.

    Support coordinates are kept, the vector is made S_xx-orthogonal to the
    earlier constrained directions, and scaled to unit S_xx-norm. Returns
    None when the projection collapses to (numerically) zero, in which case
    the caller scores r_d = 0.
    """
    sup = np.asarray(support, dtype=int)
    if sup.size == 0:
        return None
    S_E = S_xx[np.ix_(sup, sup)]
    b = np.asarray(beta_c, dtype=float)[sup]
    if i > 1 and prior:
        C = np.column_stack(
            [(S_xx @ np.asarray(d.beta_c, dtype=float))[sup] for d in prior])
        Sinv_C = np.linalg.solve(S_E, C)
        G_pinv, _ = pinv_threshold(C.T @ Sinv_C)
        b = b - Sinv_C @ (G_pinv @ (C.T @ b))
    nrm2 = float(b @ (S_E @ b))
    if nrm2 < ZERO_NORM_TOL ** 2:
        return None
    out = np.zeros(S_xx.shape[0])
    out[sup] = b / np.sqrt(nrm2)
    return out


def _pearson(u, w) -> float:
    su, sw = np.std(u), np.std(w)
    if su <= 0.0 or sw <= 0.0:
        return 0.0
    r = float(np.corrcoef(u, w)[0, 1])
    return float(np.clip(r, -1.0, 1.0))


def filter_direction(i, direction: ConstrainedDirection, prior,
                     Ms: MomentSet, x: StandardizedData, P, n) -> FilterTrace:
    """BIC scan over support sizes d = p ... i for one direction."""
    P = np.asarray(P, dtype=float)
    p = x.p
    beta_c = np.asarray(direction.beta_c, dtype=float)
    u = P @ np.asarray(direction.alpha_c, dtype=float)
    log_n = np.log(n)

    trace = FilterTrace(index=i, n=n)
    best_bic, best_d, best_support = np.inf, p, None
    for d in range(p, i - 1, -1):
        sup = threshold(beta_c, d)
        bp = project(i, sup, beta_c, prior, Ms.S_xx)
        if bp is None:
            r, bp, zeroed = 0.0, np.zeros(p), True
        else:
            r, zeroed = _pearson(u, x.X @ bp), False
        with np.errstate(divide="ignore"):
            bic = float(n * np.log(1.0 - r * r) + d * log_n)
        trace.records.append(FilterRecord(
            d=d, support=sup, beta_p=bp, r=r, bic=bic, zeroed=zeroed))
        if bic <= best_bic:
            best_bic, best_d, best_support = bic, d, sup

    trace.d0 = best_d
    trace.support = best_support
    return trace


def finalize(traces: list[FilterTrace], x: StandardizedData, P,
             rank_tol: float = 1e-10) -> FinalFit:
    """Re-estimate on the union of filtered supports and assemble results.

    Direction i takes the i-th re-estimated direction's coefficients on its
    own support, exact zeros elsewhere. Reported copies are unit Euclidean
    norm with the largest-magnitude entry nonnegative.
    """
    if not traces:
        raise DegenerateFitError("no filtered directions to finalize")
    p = x.p
    union = np.unique(np.concatenate([t.support for t in traces]))
    if union.size == 0:
        raise DegenerateFitError("all directions were filtered to zero")

    refit = fit_on_subset(x, union, P, rank_tol)
    beta_re = refit.beta_full(p)
    P = np.asarray(P, dtype=float)

    K = len(traces)
    beta_f = np.zeros((p, K))
    reported = np.zeros((p, K))
    corr = np.zeros(K)
    for j, tr in enumerate(traces):
        if tr.index != j + 1:
            raise ValueError("traces must be ordered by direction index")
        col = np.zeros(p)
        col[tr.support] = beta_re[tr.support, j]
        beta_f[:, j] = col
        corr[j] = _pearson(P @ refit.alpha[:, j], x.X @ col)
        nrm = np.linalg.norm(col)
        rep = col / nrm if nrm > 0 else col
        if rep[np.argmax(np.abs(rep))] < 0:
            rep = -rep
        reported[:, j] = rep

    return FinalFit(beta_f=beta_f, reported=reported, support_union=union,
                    final_corr=corr, traces=traces, refit=refit)
