"""Backward Bellman recursion for the discretized polytope chain.

The chain starts at the origin of ``R^m`` and moves by ``A[:, t] * eps_t``
at step ``t``. After ``T`` steps it pays the smoothed indicator of
``x < b``. Cost-to-go values live on uniform grids over the truncation
boxes; mass leaving a box is worth 0.

All grids of one solve share a spacing that divides the box growth
``sqrt(2 log lambda)``, so every grid is a sub-block of one lattice. The
transition from a grid cell then depends on the cell only through a shift,
and a backward step is a correlation of the next value table with a fixed
stencil supported on a digital line. Large correlations run as tiled FFTs.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.fft
from scipy.special import ndtr

from .grid import (DEFAULT_CELL_BUDGET, Grid, GridBudgetError, alpha_for,
                   build_box, build_grid, max_spacing, truncation_radius)
from .kernel import EPS_CUTOFF, MERGE_TOL, interval_mass, transition_row
from .preprocess import PolytopeProblem
from .smoothing import SmoothingParams, build_ledger, ramp_factors

log = logging.getLogger(__name__)

#: Work (states x stencil entries) below which shifted adds beat FFTs.
DIRECT_WORK_LIMIT = 2 * 10**7
#: Largest FFT tile, in real points.
DEFAULT_FFT_POINTS = 2**25


class ValueTable:
    """Cost-to-go values on one grid.

    Values are held densely, or as per-dimension factors whose outer product
    is the table (the smoothed terminal cost is such a product). Factor form
    keeps the largest grid of a solve out of memory.
    """

    def __init__(self, t: int, grid: Grid, values=None, factors=None):
        if (values is None) == (factors is None):
            raise ValueError("give exactly one of values or factors")
        self.t = t
        self.grid = grid
        self.factors = None if factors is None else [np.asarray(f, float) for f in factors]
        self._values = None
        if values is not None:
            values = np.asarray(values, dtype=float).reshape(grid.counts)
            self._values = values

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            out = self.factors[0]
            for f in self.factors[1:]:
                out = np.multiply.outer(out, f)
            self._values = out.reshape(self.grid.counts)
        return self._values

    def block(self, start, shape) -> np.ndarray:
        """Dense sub-array starting at ``start``; zero outside the grid."""
        out = np.zeros(tuple(shape))
        src, dst = [], []
        for s0, n, size in zip(start, shape, self.grid.counts):
            lo, hi = max(s0, 0), min(s0 + n, size)
            if hi <= lo:
                return out
            src.append(slice(lo, hi))
            dst.append(slice(lo - s0, hi - s0))
        if self._values is not None:
            out[tuple(dst)] = self._values[tuple(src)]
        else:
            piece = self.factors[0][src[0]]
            for f, sl in zip(self.factors[1:], src[1:]):
                piece = np.multiply.outer(piece, f[sl])
            out[tuple(dst)] = piece
        return out

    def gather(self, multi) -> np.ndarray:
        """Values at cells given as a tuple of index arrays."""
        if self._values is not None:
            return self._values[tuple(multi)]
        out = np.ones(np.shape(multi[0]))
        for f, idx in zip(self.factors, multi):
            out = out * f[idx]
        return out


@dataclass
class LineStencil:
    """Relative cell offsets hit by ``eps -> floor(phase + a eps / h)``."""

    offsets: np.ndarray
    weights: np.ndarray
    tail_mass: float


@dataclass
class ErrorBudget:
    theta_term: float
    alpha_term: float
    beta_term: float

    @property
    def total(self) -> float:
        return self.theta_term + self.alpha_term + self.beta_term


@dataclass
class StepInfo:
    t: int
    cells: int
    method: str
    stencil_size: int
    escaped_mass_max: float
    seconds: float


@dataclass
class SolveReport:
    estimate: float
    bound: ErrorBudget
    lam: float
    beta: float
    grid_shapes: list
    escaped_mass_max: float
    cells_total: int
    seconds: float
    steps: list = field(default_factory=list)


def terminal_values(grid: Grid, s: SmoothingParams, t: int = -1) -> ValueTable:
    """Smoothed indicator evaluated at the representatives of ``grid``."""
    if grid.dim != s.m:
        raise ValueError("grid and offset dimensions disagree")
    factors = [ramp_factors(reps, SmoothingParams(s.lam, s.b[k]))
               for k, reps in enumerate(grid.representatives)]
    return ValueTable(t, grid, factors=factors)


def line_stencil(column, spacing, phase) -> LineStencil:
    """Cell offsets and their masses along one noise line.

    A source whose representative sits at fractional lattice position
    ``phase`` lands in relative cell ``floor(phase + a * eps / h)``. The
    noise line is cut at every ``eps`` where some coordinate crosses a cell
    face, and each piece is charged to the cell of its midpoint.
    """
    a = np.asarray(column, dtype=float)
    h = np.asarray(spacing, dtype=float)
    phase = np.asarray(phase, dtype=float)
    cuts = [np.array([-EPS_CUTOFF, EPS_CUTOFF])]
    for k in np.flatnonzero(a != 0):
        slope = a[k] / h[k]
        ends = sorted((phase[k] - slope * EPS_CUTOFF, phase[k] + slope * EPS_CUTOFF))
        j = np.arange(math.ceil(ends[0]), math.floor(ends[1]) + 1)
        e = (j - phase[k]) / slope
        cuts.append(e[np.abs(e) < EPS_CUTOFF])
    eps = np.sort(np.concatenate(cuts))
    eps = eps[np.concatenate(([True], np.diff(eps) > MERGE_TOL))]
    left, right = eps[:-1], eps[1:]
    mid = 0.5 * (left + right)
    moving = a != 0
    rel = np.zeros((mid.size, a.size), dtype=np.int64)
    rel[:, moving] = np.floor(
        phase[moving] + mid[:, None] * (a[moving] / h[moving])
    ).astype(np.int64)
    offsets, inverse = np.unique(rel, axis=0, return_inverse=True)
    weights = np.zeros(len(offsets))
    np.add.at(weights, inverse.ravel(), interval_mass(left, right))
    return LineStencil(offsets, weights, 2.0 * float(ndtr(-EPS_CUTOFF)))


def lattice_alignment(src: Grid, dst: Grid):
    """Integer offset and phase of ``src`` cells inside ``dst``'s lattice.

    Returns ``(offset, phase)`` with the representative of source cell
    ``i`` at lattice position ``i + offset + phase`` of ``dst``, or ``None``
    when the grids do not share a lattice.
    """
    offset = np.zeros(src.dim, dtype=np.int64)
    phase = np.zeros(src.dim)
    for k in range(src.dim):
        h = dst.spacing[k]
        if h == 0:
            return None
        point = src.counts[k] == 1 and src.spacing[k] == 0
        if not point and abs(src.spacing[k] - h) > 1e-12 * h:
            return None
        pos = (src.box.lo[k] - dst.box.lo[k]) / h
        if not point:
            if abs(pos - round(pos)) > 1e-9:
                return None
            pos = round(pos) + 0.5
        o = math.floor(pos + 1e-9)
        frac = pos - o
        if abs(frac) < 1e-9:
            frac = 0.0
        elif abs(frac - 0.5) < 1e-9:
            frac = 0.5
        offset[k], phase[k] = o, frac
    return offset, phase


def _fft_tiles(shape, extent, budget):
    """Tile sizes keeping each FFT under ``budget`` points with few tiles.

    A tile is never cut below the kernel extent: past that point the padding
    dominates and more tiles only cost more. The budget is then exceeded.
    """
    shape = list(shape)
    ntiles = [1] * len(shape)

    def tile():
        return [math.ceil(n / c) for n, c in zip(shape, ntiles)]

    while math.prod(b + e - 1 for b, e in zip(tile(), extent)) > budget:
        b = tile()
        share = [bk / (bk + ek - 1) if bk > max(ek, 1) else -1.0
                 for bk, ek in zip(b, extent)]
        k = int(np.argmax(share))
        if share[k] < 0:
            break
        ntiles[k] += 1
    return tile()


def _correlate(nxt: ValueTable, shape, base, kernel, workers, budget):
    """``out[i] = sum_e kernel[e] * V[base + i + e]`` over ``i < shape``."""
    extent = kernel.shape
    tile = _fft_tiles(shape, extent, budget)
    fft_shape = [scipy.fft.next_fast_len(b + e - 1, real=True)
                 for b, e in zip(tile, extent)]
    axes = list(range(len(shape)))
    flipped = kernel[tuple(slice(None, None, -1) for _ in extent)]
    kernel_hat = scipy.fft.rfftn(flipped, fft_shape, axes=axes, workers=workers)
    out = np.empty(tuple(shape))
    starts = [range(0, n, b) for n, b in zip(shape, tile)]
    for corner in product(*starts):
        size = [min(b, n - c) for b, n, c in zip(tile, shape, corner)]
        x = nxt.block([bs + c for bs, c in zip(base, corner)],
                      [s + e - 1 for s, e in zip(size, extent)])
        y = scipy.fft.irfftn(
            scipy.fft.rfftn(x, fft_shape, axes=axes, workers=workers) * kernel_hat,
            fft_shape, axes=axes, workers=workers)
        keep = tuple(slice(e - 1, e - 1 + s) for e, s in zip(extent, size))
        out[tuple(slice(c, c + s) for c, s in zip(corner, size))] = y[keep]
    return out


def _stencil_step(nxt: ValueTable, grid: Grid, offset, stencil: LineStencil,
                  method: str, workers, fft_points):
    S = np.array(grid.counts)
    N = np.array(nxt.grid.counts)
    d = stencil.offsets
    reach = np.all((d >= -offset - (S - 1)) & (d <= N - 1 - offset), axis=1)
    d, w = d[reach], stencil.weights[reach]
    if w.size == 0:
        return np.zeros(grid.counts), "empty"
    order = np.lexsort(d.T[::-1])
    d, w = d[order], w[order]

    if grid.size == 1:
        cells = tuple((offset + d).T)
        return np.array(np.sum(w * nxt.gather(cells))).reshape(grid.counts), "direct"

    dmin, dmax = d.min(axis=0), d.max(axis=0)
    extent = dmax - dmin + 1
    base = offset + dmin
    if method == "auto":
        method = "direct" if grid.size * w.size <= DIRECT_WORK_LIMIT else "fft"
    if method == "direct":
        padded = nxt.block(base, S + extent - 1)
        out = np.zeros(grid.counts)
        for rel, weight in zip(d - dmin, w):
            out += weight * padded[tuple(slice(r, r + n) for r, n in zip(rel, S))]
        return out, "direct"
    kernel = np.zeros(tuple(extent))
    np.add.at(kernel, tuple((d - dmin).T), w)
    return _correlate(nxt, tuple(S), base, kernel, workers, fft_points), "fft"


def _sweep_step(nxt: ValueTable, grid: Grid, column) -> np.ndarray:
    flat_next = nxt.values.ravel()
    pts = grid.representative_points()
    out = np.empty(len(pts))
    for i, x in enumerate(pts):
        row = transition_row(x, column, nxt.grid)
        out[i] = np.sum(row.probs * flat_next[row.cells])
    return out.reshape(grid.counts)


def backward_step(nxt: ValueTable, grid: Grid, column, method: str = "auto",
                  workers=None, fft_points: int = DEFAULT_FFT_POINTS,
                  info: dict | None = None) -> ValueTable:
    """One Bellman step: expected next value along the noise line.

    ``method`` is ``"auto"``, ``"direct"``, ``"fft"`` (lattice-aligned
    grids only) or ``"sweep"``, which builds an exact transition row per
    state and works for any pair of grids.
    """
    column = np.asarray(column, dtype=float)
    if column.shape != (grid.dim,):
        raise ValueError("column length must match the grid dimension")
    align = None if method == "sweep" else lattice_alignment(grid, nxt.grid)
    if align is None:
        if method not in ("auto", "sweep"):
            raise ValueError(f"method {method!r} needs lattice-aligned grids")
        values, used, size = _sweep_step(nxt, grid, column), "sweep", 0
    else:
        offset, phase = align
        stencil = line_stencil(column, nxt.grid.spacing, phase)
        values, used = _stencil_step(nxt, grid, offset, stencil, method,
                                     workers, fft_points)
        size = len(stencil.weights)
    if info is not None:
        info.update(method=used, stencil_size=size)
    # FFT rounding can leave values a few ulps outside [0, 1]
    np.clip(values, 0.0, 1.0, out=values)
    return ValueTable(nxt.t - 1, grid, values=values)


def escape_profile(grid: Grid, column, target: Grid, chunk: int = 2**22) -> float:
    """Largest one-step mass leaving ``target.box`` over ``grid``'s states.

    The in-box noise values form one interval per state (an intersection of
    slabs), so each escape mass is two normal tail probabilities.
    """
    a = np.asarray(column, dtype=float)
    lows, highs = [], []
    for k, reps in enumerate(grid.representatives):
        lo, hi = target.box.lo[k], target.box.hi[k]
        if a[k] == 0:
            inside = (reps >= lo) & (reps <= hi)
            lows.append(np.where(inside, -np.inf, np.inf))
            highs.append(np.where(inside, np.inf, -np.inf))
        else:
            e1, e2 = (lo - reps) / a[k], (hi - reps) / a[k]
            lows.append(np.minimum(e1, e2))
            highs.append(np.maximum(e1, e2))
    m = grid.dim
    first = lows[0].size
    step = max(1, chunk // max(1, grid.size // first))
    worst = 0.0
    for s in range(0, first, step):
        l = u = None
        for k in range(m):
            sl = slice(s, s + step) if k == 0 else slice(None)
            view = [1] * m
            view[k] = -1
            lk = lows[k][sl].reshape(view)
            uk = highs[k][sl].reshape(view)
            l = lk if l is None else np.maximum(l, lk)
            u = uk if u is None else np.minimum(u, uk)
        lc = np.maximum(l, -EPS_CUTOFF)
        uc = np.minimum(u, EPS_CUTOFF)
        esc = np.where(lc < uc, ndtr(lc) + ndtr(-uc), 1.0)
        worst = max(worst, float(esc.max()))
    return worst


def lattice_spacing(lam: float, beta: float, m: int) -> float:
    """Common grid spacing: ``sqrt(2 log lambda) / k`` no wider than allowed."""
    r = truncation_radius(lam)
    k = math.ceil(r / max_spacing(beta, m) * (1 - 1e-12))
    return r / k


def build_grids(lam: float, beta: float, m: int, T: int,
                cell_budget: int = DEFAULT_CELL_BUDGET) -> list:
    """Grids over the truncation boxes ``H_0 .. H_T`` on one lattice."""
    _check(lam, beta)
    h = lattice_spacing(lam, beta, m)
    k = round(truncation_radius(lam) / h)
    largest = (2 * T * k) ** m
    if largest > cell_budget:
        raise GridBudgetError(largest, int(cell_budget))
    return [build_grid(build_box(t, lam, m), beta, spacing=h, cell_budget=cell_budget)
            for t in range(T + 1)]


def error_bound(p: PolytopeProblem, lam: float, beta: float) -> ErrorBudget:
    """A-priori sup-norm error of the discretized solve.

    Smoothing term ``2m / (min|a_iT| lambda)``, truncation term ``T alpha``
    and discretization term ``2 m lambda beta (T + 1)``.
    """
    _check(lam, beta)
    _check_last_column(p)
    m, T = p.m, p.T
    theta = 2.0 * m / (np.min(np.abs(p.A[:, -1])) * lam)
    alpha = T * alpha_for(lam, p.A)
    beta_term = 2.0 * m * lam * beta * (T + 1)
    ledger_term = beta * build_ledger(lam, m, T).beta_coefficient(0)
    if not math.isclose(beta_term, ledger_term, rel_tol=1e-12):
        raise RuntimeError("discretization term disagrees with the Lipschitz ledger")
    return ErrorBudget(float(theta), float(alpha), float(beta_term))


def solve(p: PolytopeProblem, lam: float, beta: float,
          cell_budget: int = DEFAULT_CELL_BUDGET, method: str = "auto",
          workers=None, fft_points: int = DEFAULT_FFT_POINTS) -> SolveReport:
    """Approximate ``P(A z <= b)`` for ``z ~ N(0, I_T)``.

    ``p`` must already have a zero-free last column (see
    :func:`gauss_polytope.preprocess.normalize_last_column`).
    """
    started = time.perf_counter()
    bound = error_bound(p, lam, beta)
    grids = build_grids(lam, beta, p.m, p.T, cell_budget)
    table = terminal_values(grids[-1], SmoothingParams(lam, p.b), t=p.T)
    steps = []
    for t in range(p.T - 1, -1, -1):
        tic = time.perf_counter()
        info = {}
        column = p.A[:, t]
        escaped = escape_profile(grids[t], column, grids[t + 1])
        table = backward_step(table, grids[t], column, method=method,
                              workers=workers, fft_points=fft_points, info=info)
        steps.append(StepInfo(t, grids[t].size, info["method"], info["stencil_size"],
                              escaped, time.perf_counter() - tic))
        log.debug("step %d: %s", t, steps[-1])
    estimate = float(table.values.ravel()[0])
    return SolveReport(
        estimate=estimate,
        bound=bound,
        lam=lam,
        beta=beta,
        grid_shapes=[g.counts for g in grids],
        escaped_mass_max=max(s.escaped_mass_max for s in steps),
        cells_total=sum(g.size for g in grids),
        seconds=time.perf_counter() - started,
        steps=steps[::-1],
    )


def parameters_for(n: float) -> tuple[float, float]:
    """Default schedule ``lambda = sqrt(n)``, ``beta = 1 / n``."""
    if not n > 1:
        raise ValueError("lambda must exceed 1 (need n > 1)")
    return math.sqrt(n), 1.0 / n


def _check(lam: float, beta: float) -> None:
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    if not beta > 0:
        raise ValueError("beta must be positive")


def _check_last_column(p: PolytopeProblem) -> None:
    if np.any(p.A[:, -1] == 0):
        raise ValueError(
            "last column of A has zero entries; normalize the problem first"
        )
