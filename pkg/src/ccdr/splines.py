"""Clamped B-spline basis of the response variable.

The basis is built on [a, b] with m-fold replicated boundary knots and k_n
interior knots, giving m + k_n basis functions of order m (degree m - 1).
Because the full set sums to 1 everywhere on [a, b], downstream estimation
uses only the first m + k_n - 1 functions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstantResponseError, DegenerateResponseError

KNOT_PLACEMENTS = ("quantile", "uniform")


@dataclass(frozen=True)
class SplineConfig:
    order: int = 3
    internal_knot_count: int = 4
    range: tuple[float, float] | None = None
    knot_placement: str = "quantile"

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("spline order must be at least 1")
        if self.internal_knot_count < 0:
            raise ConfigError("internal knot count must be nonnegative")
        if self.range is not None and not self.range[0] < self.range[1]:
            raise ConfigError("range must satisfy a < b")
        if self.knot_placement not in KNOT_PLACEMENTS:
            raise ConfigError(f"unknown knot placement {self.knot_placement!r}")

    @property
    def n_basis(self) -> int:
        return self.order + self.internal_knot_count

    @property
    def n_retained(self) -> int:
        return self.n_basis - 1


@dataclass(frozen=True)
class SplineBasis:
    """Full knot vector (length 2m + k_n) plus the generating config."""

    knots: np.ndarray
    config: SplineConfig

    @property
    def a(self) -> float:
        return float(self.knots[0])

    @property
    def b(self) -> float:
        return float(self.knots[-1])

    @property
    def n_basis(self) -> int:
        return self.config.n_basis

    @property
    def n_retained(self) -> int:
        return self.config.n_retained

    @property
    def interior_knots(self) -> np.ndarray:
        m = self.config.order
        return self.knots[m:m + self.config.internal_knot_count]


def _spread_interior(raw, a, b):
    """Force strictly increasing interior knots inside (a, b).

    Coincident or out-of-range candidates are nudged halfway toward the next
    distinct value to their right (the upper boundary if none remains).
    """
    raw = np.sort(np.asarray(raw, dtype=float))
    out = []
    prev = a
    for idx, v in enumerate(raw):
        later = raw[idx + 1:]
        bigger = later[later > max(v, prev)]
        nxt = float(bigger[0]) if bigger.size else b
        if v <= prev or v >= b:
            v = prev + 0.5 * (nxt - prev)
        out.append(v)
        prev = v
    return np.asarray(out)


def make_basis(y_values, config: SplineConfig | None = None) -> SplineBasis:
    """Build the clamped knot vector for a response sample.

    The range defaults to the sample range. Interior knots sit at the
    j/(k_n+1) sample quantiles (quantile mode) or are equally spaced
    (uniform mode).
    """
    config = config or SplineConfig()
    y = np.asarray(y_values, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise DegenerateResponseError("need at least two response values")

    if config.range is not None:
        a, b = map(float, config.range)
    else:
        a, b = float(np.min(y)), float(np.max(y))
    if not a < b:
        raise ConstantResponseError(
            f"response range is degenerate: [{a}, {b}]")

    kn = config.internal_knot_count
    if config.knot_placement == "quantile":
        distinct = np.unique(y)
        if distinct.size < kn + 2:
            raise DegenerateResponseError(
                f"{distinct.size} distinct response values cannot support "
                f"{kn} interior knots (need at least {kn + 2})")
        probs = np.arange(1, kn + 1) / (kn + 1)
        interior = np.quantile(y, probs) if kn else np.empty(0)
    else:
        interior = a + (b - a) * np.arange(1, kn + 1) / (kn + 1)

    interior = _spread_interior(interior, a, b)
    m = config.order
    knots = np.concatenate([np.full(m, a), interior, np.full(m, b)])
    return SplineBasis(knots=knots, config=config)


def basis_values(basis: SplineBasis, y) -> np.ndarray:
    """All m + k_n basis values at each point, by the Cox-de Boor recursion.

    Input is clamped into [a, b]; rows sum to 1. Returns shape
    (len(y), m + k_n), or (m + k_n,) for scalar input.
    """
    scalar = np.isscalar(y) or np.ndim(y) == 0
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    yv = np.clip(yv, basis.a, basis.b)

    t = basis.knots
    m = basis.config.order
    nb = basis.n_basis
    n = yv.shape[0]

    # Order-1 seed: indicator of [t_j, t_{j+1}), closing the last nonempty
    # interval on the right so the basis is defined at y = b.
    vals = np.zeros((n, len(t) - 1))
    for j in range(len(t) - 1):
        left, right = t[j], t[j + 1]
        if right > left:
            hit = (yv >= left) & (yv < right)
            if right == basis.b:
                hit |= yv == basis.b
            vals[hit, j] = 1.0

    for order in range(2, m + 1):
        nxt = np.zeros((n, len(t) - order))
        for j in range(len(t) - order):
            d1 = t[j + order - 1] - t[j]
            d2 = t[j + order] - t[j + 1]
            term = 0.0
            if d1 > 0:
                term = (yv - t[j]) / d1 * vals[:, j]
            if d2 > 0:
                term = term + (t[j + order] - yv) / d2 * vals[:, j + 1]
            nxt[:, j] = term
        vals = nxt

    vals = vals[:, :nb]
    return vals[0] if scalar else vals


def evaluate_pi(basis: SplineBasis, y) -> np.ndarray:
    """The retained m + k_n - 1 basis values at a single point."""
    return basis_values(basis, y)[..., :basis.n_retained]


def design_matrix(basis: SplineBasis, y_values) -> np.ndarray:
    """Stack evaluate_pi over a response sample: shape (n, m + k_n - 1)."""
    vals = basis_values(basis, np.asarray(y_values, dtype=float).ravel())
    return vals[:, :basis.n_retained]
