"""Truncation boxes and uniform beta-partitions of them.

A grid tiles a box with half-open rectangular cells (the last cell in each
dimension is closed) and uses cell centres as representatives, so every
point of a cell lies within ``(h / 2) * sqrt(m)`` of its representative in
the Euclidean metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CELL_BUDGET = 10**8


class GridBudgetError(RuntimeError):
    """Raised when a grid would exceed the configured cell budget."""

    def __init__(self, required: int, allowed: int):
        self.required = required
        self.allowed = allowed
        super().__init__(
            f"grid needs {required} cells but the cell budget allows {allowed}"
        )


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned closed box ``[lo_1, hi_1] x ... x [lo_m, hi_m]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("box needs lo <= hi in every dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform partition of a box.

    Attributes
    ----------
    box : Box
        The partitioned box.
    spacing : ndarray
        Cell width per dimension (0 for a zero-width dimension).
    counts : tuple of int
        Number of cells per dimension.
    """

    box: Box
    spacing: np.ndarray
    counts: tuple
    breakpoints: list = field(init=False, repr=False)
    representatives: list = field(init=False, repr=False)

    def __post_init__(self):
        spacing = np.asarray(self.spacing, dtype=float)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        bps, reps = [], []
        for lo, hi, h, n in zip(self.box.lo, self.box.hi, spacing, self.counts):
            if n == 1 and lo == hi:
                bps.append(np.array([lo, hi]))
                reps.append(np.array([lo]))
                continue
            # offsets from the centre keep lattice points exact (0 stays 0)
            edges = 0.5 * (lo + hi) + h * (np.arange(n + 1) - 0.5 * n)
            edges[0], edges[-1] = lo, hi
            bps.append(edges)
            reps.append(0.5 * (edges[:-1] + edges[1:]))
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "representatives", reps)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    def representative(self, index) -> np.ndarray:
        """Representative point of a cell given by flat or multi-index."""
        multi = np.unravel_index(index, self.counts) if np.ndim(index) == 0 else index
        return np.array([r[i] for r, i in zip(self.representatives, multi)])

    def representative_points(self) -> np.ndarray:
        """All representatives as an ``(size, m)`` array in flat-index order."""
        mesh = np.meshgrid(*self.representatives, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def cell_bounds(self, index):
        """Lower and upper corners of a cell (flat index)."""
        multi = np.unravel_index(index, self.counts)
        lo = np.array([b[i] for b, i in zip(self.breakpoints, multi)])
        hi = np.array([b[i + 1] for b, i in zip(self.breakpoints, multi)])
        return lo, hi


def truncation_radius(lam: float) -> float:
    """Half-width growth per step, ``sqrt(2 log lambda)``."""
    _check_lambda(lam)
    return math.sqrt(2.0 * math.log(lam))


def build_box(t: int, lam: float, m: int) -> Box:
    """Truncation box ``[-t r, t r]^m`` with ``r = sqrt(2 log lambda)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    half = t * truncation_radius(lam)
    return Box(np.full(m, -half), np.full(m, half))


def max_spacing(beta: float, m: int) -> float:
    """Largest per-dimension cell width keeping centres within ``beta``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return 2.0 * beta / math.sqrt(m)


def build_grid(box: Box, beta: float, spacing=None,
               cell_budget: int = DEFAULT_CELL_BUDGET) -> Grid:
    """Uniform beta-partition of ``box``.

    With ``spacing=None`` each dimension of width ``w`` gets
    ``ceil(w / h_max)`` equal cells, ``h_max = 2 beta / sqrt(m)``. A given
    ``spacing`` (scalar or per dimension) must not exceed ``h_max`` and must
    divide every nonzero width; this is how the solver keeps all grids on
    one lattice.
    """
    m = box.dim
    h_max = max_spacing(beta, m)
    widths = box.hi - box.lo
    if spacing is not None:
        spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (m,)).copy()
        if np.any(spacing > h_max * (1 + 1e-12)) or np.any(spacing <= 0):
            raise ValueError(
                f"spacing must lie in (0, {h_max:.6g}] for beta={beta:g}"
            )
    counts, steps = [], []
    for k in range(m):
        w = widths[k]
        if w == 0:
            counts.append(1)
            steps.append(0.0)
            continue
        if spacing is None:
            n = math.ceil(w / h_max * (1 - 1e-12))
            steps.append(w / n)
        else:
            ratio = w / spacing[k]
            n = round(ratio)
            if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
                raise ValueError(
                    f"spacing {spacing[k]:.6g} does not divide box width {w:.6g}"
                )
            steps.append(spacing[k])
        counts.append(int(n))
    required = math.prod(counts)
    if required > cell_budget:
        raise GridBudgetError(required, int(cell_budget))
    return Grid(box, np.array(steps), tuple(counts))


def project(grid: Grid, x) -> int:
    """Flat index of the cell containing ``x``.

    Interior breakpoints belong to the cell above them; the upper box face
    belongs to the last cell.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (grid.dim,):
        raise ValueError(f"point must have shape ({grid.dim},)")
    if not grid.box.contains(x):
        raise ValueError(f"point {x.tolist()} lies outside the grid box")
    multi = []
    for xi, edges, n in zip(x, grid.breakpoints, grid.counts):
        j = int(np.searchsorted(edges, xi, side="right")) - 1
        multi.append(min(max(j, 0), n - 1))
    return int(np.ravel_multi_index(tuple(multi), grid.counts))


def alpha_for(lam: float, A) -> float:
    """Escape budget for the boxes ``H_t``.

    ``sqrt(2) m a_max / sqrt(log lambda) * lambda ** (-1 / a_max**2)`` with
    ``a_max`` the largest absolute entry of ``A`` and ``m`` its row count.
    """
    _check_lambda(lam)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a_max = float(np.max(np.abs(A)))
    if a_max == 0:
        raise ValueError("A must have a nonzero entry")
    m = A.shape[0]
    return (math.sqrt(2.0) * m * a_max / math.sqrt(math.log(lam))
            * lam ** (-1.0 / a_max**2))


def _check_lambda(lam: float) -> None:
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
