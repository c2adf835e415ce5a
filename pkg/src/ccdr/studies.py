"""Generative models, full-pipeline runner, and Monte Carlo studies.

Four built-in study designs on p = 24 normal predictors. Replicates are
drawn from independent streams keyed by (base_seed, replicate), so reports
do not depend on execution order or concurrency.
"""

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .cancor import CancorFit, dimension_test, fit_from_moments
from .constrained import ConstrainedDirection, PathConfig, PathTrace, run_path
from .data import Dataset
from .errors import CcdrError, ConfigError, DegenerateFitError
from .filtering import FinalFit, filter_direction, finalize
from .moments import moments, standardize
from .splines import SplineConfig, design_matrix, make_basis

STUDY_P = 24
DEFAULT_BASE_SEED = 1234

# response rule, true K, predictor covariance kind, metric split position
_STUDY_TABLE = {
    1: dict(k=1, cov="identity", split=3, metrics=("A3", "A21")),
    2: dict(k=2, cov="identity", split=2, metrics=("A2", "A22")),
    3: dict(k=2, cov="toeplitz", split=2, metrics=("A2", "A22")),
    4: dict(k=1, cov="identity", split=None, metrics=("A",)),
}


@dataclass(frozen=True)
class PipelineSettings:
    """Knobs shared by the fit pipeline and the study harness."""

    order: int = 3
    knots: int = 4
    alpha_level: float = 0.005
    delta_t: float = 0.05
    test_level: float = 0.05
    rank_tol: float = 1e-10
    max_iterations: int = 500

    def path_config(self) -> PathConfig:
        return PathConfig(alpha_level=self.alpha_level,
                          delta_t=self.delta_t,
                          max_iterations=self.max_iterations)


@dataclass(frozen=True)
class StudySpec:
    study: int
    n: int
    replicates: int = 100
    base_seed: int = DEFAULT_BASE_SEED
    fix_k: bool = True

    def __post_init__(self):
        if self.study not in _STUDY_TABLE:
            raise ConfigError(f"unknown study id {self.study}")
        if self.n < 10:
            raise ConfigError("study sample size too small")
        if self.replicates < 1:
            raise ConfigError("need at least one replicate")

    @property
    def p(self) -> int:
        return STUDY_P

    @property
    def true_k(self) -> int:
        return _STUDY_TABLE[self.study]["k"]

    @property
    def metric_names(self) -> tuple[str, ...]:
        return _STUDY_TABLE[self.study]["metrics"]

    def covariance(self) -> np.ndarray:
        if _STUDY_TABLE[self.study]["cov"] == "toeplitz":
            idx = np.arange(STUDY_P)
            return 0.5 ** np.abs(idx[:, None] - idx[None, :])
        return np.eye(STUDY_P)

    def true_supports(self) -> list[set[int]]:
        return {1: [{0, 1, 2}],
                2: [{0}, {1}],
                3: [{0}, {1}],
                4: [set(range(STUDY_P))]}[self.study]


def _response(study: int, x: np.ndarray, eps: np.ndarray) -> np.ndarray:
    if study == 1:
        return x[:, 0] + x[:, 1] + x[:, 2] + 0.5 * eps
    if study in (2, 3):
        return x[:, 0] / (0.5 + (x[:, 1] + 1.5) ** 2) + 0.2 * eps
    return x.sum(axis=1) + 0.5 * eps


def generate(spec: StudySpec, replicate: int) -> Dataset:
    """One replicate dataset from its own (base_seed, replicate) stream."""
    rng = np.random.default_rng([spec.base_seed, int(replicate)])
    z = rng.standard_normal((spec.n, STUDY_P))
    cov = spec.covariance()
    x = z if _STUDY_TABLE[spec.study]["cov"] == "identity" \
        else z @ np.linalg.cholesky(cov).T
    eps = rng.standard_normal(spec.n)
    return Dataset(y=_response(spec.study, x, eps), x=x,
                   names=[f"x{j + 1}" for j in range(STUDY_P)])


@dataclass
class PipelineResult:
    fit: CancorFit
    k_used: int
    k_hat: int | None
    directions: list[ConstrainedDirection]
    path_traces: list[PathTrace]
    final: FinalFit
    names: list[str]
    column_sds: np.ndarray


def run_pipeline(data: Dataset, K: int | None = None,
                 settings: PipelineSettings | None = None) -> PipelineResult:
    """standardize -> spline basis -> fit -> per-direction path -> filter.

    K = None estimates the dimensionality by the sequential tests; an
    explicit K skips them.
    """
    settings = settings or PipelineSettings()
    x = standardize(data.x, data.names)
    basis = make_basis(data.y, SplineConfig(
        order=settings.order, internal_knot_count=settings.knots))
    P = design_matrix(basis, data.y)
    Ms = moments(x, P)
    fit = fit_from_moments(Ms, settings.rank_tol)

    k_hat = None
    if K is None:
        k_hat = dimension_test(fit, data.n, level=settings.test_level).k_hat
        K = k_hat
    if K < 1:
        raise DegenerateFitError("no directions requested")
    if K > fit.r:
        raise ConfigError(f"K = {K} exceeds the {fit.r} available directions")

    pcfg = settings.path_config()
    directions: list[ConstrainedDirection] = []
    path_traces: list[PathTrace] = []
    filter_traces = []
    for i in range(1, K + 1):
        unc = (fit.alpha[:, i - 1], fit.beta[:, i - 1], float(fit.gamma[i - 1]))
        best, ptrace = run_path(i, Ms, unc, directions, data.n, pcfg)
        path_traces.append(ptrace)
        ftrace = filter_direction(i, best, directions, Ms, x, P, data.n)
        directions.append(best)
        filter_traces.append(ftrace)

    final = finalize(filter_traces, x, P, settings.rank_tol)
    return PipelineResult(fit=fit, k_used=K, k_hat=k_hat,
                          directions=directions, path_traces=path_traces,
                          final=final, names=list(x.names),
                          column_sds=x.column_sds)


def metrics(final: FinalFit, spec: StudySpec) -> dict[str, int]:
    """Zero-coefficient (or zero-row) counts for one replicate."""
    B = final.beta_f
    if B.shape[0] != spec.p:
        raise ValueError("fit dimension does not match the study spec")
    split = _STUDY_TABLE[spec.study]["split"]
    if spec.study == 1:
        z = B[:, 0] == 0.0
        return {"A3": int(z[:split].sum()), "A21": int(z[split:].sum())}
    if spec.study == 4:
        return {"A": int((B[:, 0] == 0.0).sum())}
    if B.shape[1] < 2:
        raise ValueError("zero-row metrics need two directions")
    rows = np.all(B[:, :2] == 0.0, axis=1)
    return {"A2": int(rows[:split].sum()), "A22": int(rows[split:].sum())}


@dataclass
class SimulationReport:
    spec: StudySpec
    settings: PipelineSettings
    means: dict[str, float]
    ses: dict[str, float]
    counts: list[dict[str, int] | None]
    failures: list[tuple[int, str]] = field(default_factory=list)
    k_hat_errors: int = 0


def _one_replicate(spec: StudySpec, settings: PipelineSettings, rep: int):
    data = generate(spec, rep)
    K = spec.true_k if spec.fix_k else None
    result = run_pipeline(data, K=K, settings=settings)
    if not spec.fix_k and result.k_used != spec.true_k:
        return ("k_error", result.k_used)
    return ("ok", metrics(result.final, spec))


def _safe_replicate(args):
    spec, settings, rep = args
    try:
        return rep, _one_replicate(spec, settings, rep)
    except CcdrError as exc:
        return rep, ("fail", f"{type(exc).__name__}: {exc}")


def run_study(spec: StudySpec, settings: PipelineSettings | None = None,
              workers: int = 1) -> SimulationReport:
    """All replicates of one study, aggregated into means and SEs.

    Replicates may run concurrently; results are folded in replicate order
    so the report is identical either way. Failed replicates are excluded
    and recorded.
    """
    settings = settings or PipelineSettings()
    jobs = [(spec, settings, rep) for rep in range(spec.replicates)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            raw = dict(ex.map(_safe_replicate, jobs))
        outcomes = [raw[rep] for rep in range(spec.replicates)]
    else:
        outcomes = [_safe_replicate(j)[1] for j in jobs]

    counts: list[dict[str, int] | None] = []
    failures: list[tuple[int, str]] = []
    k_errors = 0
    for rep, outcome in enumerate(outcomes):
        kind, payload = outcome
        if kind == "ok":
            counts.append(payload)
        elif kind == "k_error":
            counts.append(None)
            k_errors += 1
        else:
            counts.append(None)
            failures.append((rep, payload))

    means, ses = {}, {}
    used = [c for c in counts if c is not None]
    for name in spec.metric_names:
        vals = np.array([c[name] for c in used], dtype=float)
        if vals.size == 0:
            means[name], ses[name] = float("nan"), float("nan")
        else:
            means[name] = float(vals.mean())
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            ses[name] = sd / np.sqrt(vals.size)
    return SimulationReport(spec=spec, settings=settings, means=means,
                            ses=ses, counts=counts, failures=failures,
                            k_hat_errors=k_errors)
