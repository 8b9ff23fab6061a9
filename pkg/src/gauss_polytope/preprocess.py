"""Reduce a Gaussian/polytope pair to the solver's standard form.

The solver wants ``N(0, I)`` and a constraint matrix whose last column has
no zero entries. Strict and non-strict inequalities are treated alike: they
differ only on a set of Gaussian measure zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PolytopeProblem:
    """The polytope ``{x : A x <= b}``; columns of ``A`` are time steps."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("A must be a nonempty m x T matrix")
        if b.shape != (A.shape[0],):
            raise ValueError(f"b must have length {A.shape[0]}, got {b.size}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def T(self) -> int:
        return self.A.shape[1]

    def contains(self, z, tol: float = 0.0):
        """Membership of points ``z`` (shape ``(..., T)``)."""
        return np.all(np.asarray(z) @ self.A.T <= self.b + tol, axis=-1)


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape must match the mean length")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


class CovarianceError(ValueError):
    """Covariance is not symmetric positive definite."""


def cholesky_factor(cov) -> np.ndarray:
    """Lower Cholesky factor; reports the first failing pivot (0-based)."""
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
        raise CovarianceError("covariance is not symmetric")
    c, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info > 0:
        raise CovarianceError(
            f"covariance is not positive definite: pivot {info - 1} is not positive"
        )
    if info < 0:
        raise CovarianceError(f"invalid covariance argument {-info}")
    return c


def whiten(g: GaussianSpec, p: PolytopeProblem) -> PolytopeProblem:
    """Rewrite ``P(Z in P)`` for ``Z ~ N(mean, cov)`` over ``N(0, I)``.

    With ``cov = C C^T``: ``A' = A C`` and ``b' = b - A mean``.
    """
    if p.T != g.mean.size:
        raise ValueError(
            f"A has {p.T} columns but the Gaussian has dimension {g.mean.size}"
        )
    C = cholesky_factor(g.covariance)
    return PolytopeProblem(p.A @ C, p.b - p.A @ g.mean)


def mixing_matrix(A) -> tuple[np.ndarray, np.ndarray]:
    """Row permutation and nonnegative row-mixing matrix for the last column.

    Returns ``(order, T)`` such that ``T @ A[order]`` has no zero in its
    last column. ``order`` moves the row with the largest ``|a_{i,n}|`` to
    the bottom; ``T`` is ``I/2`` plus a last column of
    ``max|A| / |a_{m,n}|``.

    ``{x : T A x <= T b}`` contains ``{x : A x <= b}`` but is in general
    strictly larger, so :func:`normalize_last_column` does not use it.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    last = A[:, -1]
    pivot = int(np.argmax(np.abs(last)))
    if last[pivot] == 0:
        raise ValueError("last column is entirely zero")
    order = np.array([i for i in range(m) if i != pivot] + [pivot])
    T = 0.5 * np.eye(m)
    T[:, -1] = np.max(np.abs(A)) / abs(last[pivot])
    return order, T


def drop_zero_columns(p: PolytopeProblem) -> tuple[PolytopeProblem, np.ndarray]:
    """Remove all-zero columns; returns the problem and the kept column indices.

    A zero column is a free standard normal factor of mass one.
    """
    kept = np.flatnonzero(np.any(p.A != 0, axis=0))
    for j in np.flatnonzero(np.all(p.A == 0, axis=0)):
        log.info("dropping all-zero constraint column %d", j)
    if kept.size == 0:
        raise ValueError("every column of A is zero; nothing to integrate")
    return PolytopeProblem(p.A[:, kept], p.b), kept


def drop_trivial_rows(p: PolytopeProblem) -> PolytopeProblem:
    """Remove rows ``0 <= b_i`` that every point satisfies.

    Raises ``ValueError`` for a row ``0 <= b_i < 0`` (empty polytope) or
    when no constraint is left (whole space).
    """
    zero = np.all(p.A == 0, axis=1)
    if np.any(zero & (p.b < 0)):
        raise ValueError("a zero row with negative offset makes the polytope empty")
    if np.all(zero):
        raise ValueError("every row of A is zero; the polytope is the whole space")
    for i in np.flatnonzero(zero):
        log.info("dropping always-satisfied constraint row %d", i)
    return p if not np.any(zero) else PolytopeProblem(p.A[~zero], p.b[~zero])


def normalizing_rotation(A, candidates: int = 256) -> np.ndarray:
    """Symmetric orthogonal ``Q`` with ``A @ Q`` free of zeros in its last column.

    ``Q`` is the Householder reflection swapping ``e_n`` and a unit vector
    ``v``; the new last column is ``A v``. ``v`` is the candidate with the
    largest ``min_i |(A v)_i|`` among ``e_n`` and a fixed pseudo-random set,
    which keeps the smoothing error term small. Rows of ``A`` must be
    nonzero.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    e = np.zeros(n)
    e[-1] = 1.0
    if np.all(A[:, -1] != 0):
        return np.eye(n)
    if n == 1:
        raise ValueError("a single column with zeros cannot be rotated")
    dirs = np.random.default_rng(0).standard_normal((candidates, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    score = np.min(np.abs(dirs @ A.T), axis=1)
    v = dirs[int(np.argmax(score))]
    if score.max() <= 0:
        raise ValueError("no rotation found; A has an all-zero row")
    u = e - v
    return np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)


def normalization_map(p: PolytopeProblem) -> tuple[np.ndarray, np.ndarray]:
    """``(kept, Q)`` taking original points ``z`` to ``z[..., kept] @ Q``.

    ``z`` is in ``p`` exactly when the mapped point is in
    ``normalize_last_column(p)``; the map preserves ``N(0, I)``.
    """
    q, kept = drop_zero_columns(drop_trivial_rows(p))
    return kept, normalizing_rotation(q.A)


def normalize_last_column(p: PolytopeProblem) -> PolytopeProblem:
    """Equivalent problem whose last column has no zero entries.

    Zero columns and always-satisfied zero rows are dropped; remaining zeros
    in the last column are removed by an orthogonal change of variables,
    which leaves the standard Gaussian and so the probability unchanged.
    """
    if np.all(p.A[:, -1] != 0) and np.all(np.any(p.A != 0, axis=0)):
        return p
    q = drop_zero_columns(drop_trivial_rows(p))[0]
    return PolytopeProblem(q.A @ normalizing_rotation(q.A), q.b)


def standardize(p: PolytopeProblem, g: GaussianSpec | None = None) -> PolytopeProblem:
    """Whiten (when a Gaussian is given) and normalize the last column."""
    if g is not None:
        p = whiten(g, p)
    return normalize_last_column(p)
