"""Standardization, sample moment matrices, and spectral helpers.

Every covariance here uses centered columns and divisor n - 1. Canonical
correlations and directions are invariant to that choice; only the Fisher
confidence limit refers to n explicitly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError, ZeroVarianceError

SYM_TOL = 1e-10
DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class StandardizedData:
    """Predictor matrix with columns centered to mean 0, variance 1."""

    X: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    names: list[str]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def restrict(self, columns) -> "StandardizedData":
        cols = np.asarray(columns, dtype=int)
        return StandardizedData(
            X=self.X[:, cols],
            column_means=self.column_means[cols],
            column_sds=self.column_sds[cols],
            names=[self.names[j] for j in cols],
        )


@dataclass(frozen=True)
class MomentSet:
    """Sample covariances of x, of the spline features, and across them.

    S_px has one row per spline feature and one column per predictor.
    """

    S_xx: np.ndarray
    S_pp: np.ndarray
    S_px: np.ndarray

    @property
    def p(self) -> int:
        return self.S_xx.shape[0]

    @property
    def q(self) -> int:
        return self.S_pp.shape[0]


def standardize(raw, names=None) -> StandardizedData:
    """Center and scale each column by its sample sd (divisor n - 1)."""
    X = np.asarray(raw, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ZeroVarianceError("need at least two rows to standardize")
    names = list(names) if names is not None else [
        f"x{j + 1}" for j in range(X.shape[1])]
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    dead = np.flatnonzero(sds <= 0.0)
    if dead.size:
        raise ZeroVarianceError(
            "constant predictor column(s): "
            + ", ".join(names[j] for j in dead))
    return StandardizedData(
        X=(X - means) / sds, column_means=means, column_sds=sds, names=names)


def moments(x: StandardizedData, P) -> MomentSet:
    """Sample covariance matrices of (x, spline design matrix P)."""
    P = np.asarray(P, dtype=float)
    if P.shape[0] != x.n:
        raise ValueError(
            f"row count mismatch: predictors have {x.n}, features {P.shape[0]}")
    Xc = x.X - x.X.mean(axis=0)
    Pc = P - P.mean(axis=0)
    d = x.n - 1
    S_xx = Xc.T @ Xc / d
    S_pp = Pc.T @ Pc / d
    S_px = Pc.T @ Xc / d
    S_xx = 0.5 * (S_xx + S_xx.T)
    S_pp = 0.5 * (S_pp + S_pp.T)
    return MomentSet(S_xx=S_xx, S_pp=S_pp, S_px=S_px)


def _fix_signs(vectors):
    # Largest-magnitude entry of each eigenvector made nonnegative.
    idx = np.argmax(np.abs(vectors), axis=0)
    flip = vectors[idx, np.arange(vectors.shape[1])] < 0
    vectors = vectors.copy()
    vectors[:, flip] *= -1.0
    return vectors


def sym_eigen(A):
    """Eigenvalues (descending) and sign-fixed orthonormal eigenvectors."""
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > SYM_TOL * scale:
        raise SingularMatrixError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(vals)[::-1]
    return vals[order], _fix_signs(vecs[:, order])


def inv_sqrt(A, rank_tol: float = DEFAULT_RANK_TOL):
    """Inverse square root V diag(lambda^-1/2) V^T of an SPD matrix."""
    vals, vecs = sym_eigen(A)
    floor = rank_tol * max(vals[0], 0.0)
    if vals[-1] <= floor:
        raise SingularMatrixError(
            f"matrix is numerically singular: eigenvalue {vals[-1]:.3e} "
            f"below threshold {floor:.3e}")
    return (vecs / np.sqrt(vals)) @ vecs.T


def pinv_threshold(A, rank_tol: float = DEFAULT_RANK_TOL):
    """Spectral pseudo-inverse dropping small eigenvalues.

    Returns (pseudo-inverse, retained rank).
    """
    vals, vecs = sym_eigen(A)
    floor = rank_tol * max(vals[0], 0.0)
    keep = vals > floor
    rank = int(keep.sum())
    inv_vals = np.where(keep, 1.0 / np.where(keep, vals, 1.0), 0.0)
    return (vecs * inv_vals) @ vecs.T, rank
