"""One-dimensional Gaussian machinery for the line kernel ``x -> x + a * eps``.

Every transition probability of the discretized chain is the standard
normal mass of an interval of ``eps`` values, so nothing here integrates in
more than one dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .grid import Grid, project
from .smoothing import SmoothingParams, in_smoothing_region

#: Noise values beyond this magnitude are folded into the escaped mass.
EPS_CUTOFF = 9.0
#: Breakpoints closer than this are merged.
MERGE_TOL = 1e-14


def std_normal_cdf(x):
    """Standard normal CDF, clamped to [0, 1]."""
    return np.clip(ndtr(x), 0.0, 1.0)


def interval_mass(lo, hi):
    """``P(lo < eps < hi)`` for standard normal ``eps``, elementwise.

    Upper-tail intervals are evaluated through the survival function so
    that small masses keep their relative accuracy. Empty intervals give 0.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = lo > 0
    mass = np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))
    return np.where(hi > lo, np.maximum(mass, 0.0), 0.0)


def gaussian_tail_bound(t: float) -> float:
    """Upper bound ``exp(-t**2 / 2) / t`` on ``P(eps > t)``."""
    if not t > 0:
        raise ValueError("tail bound needs t > 0")
    return math.exp(-0.5 * t * t) / t


@dataclass
class TransitionRow:
    """Distribution of the target cell reached from one state.

    ``cells`` holds flat cell indices in ascending order and ``probs`` their
    masses; ``escaped_mass`` is what leaves the target box (including noise
    beyond the cutoff).
    """

    cells: np.ndarray
    probs: np.ndarray
    escaped_mass: float

    @property
    def total(self) -> float:
        return float(self.probs.sum() + self.escaped_mass)

    def as_dict(self) -> dict:
        return dict(zip(self.cells.tolist(), self.probs.tolist()))


def _merged(points: np.ndarray) -> np.ndarray:
    points = np.sort(points)
    if points.size < 2:
        return points
    keep = np.concatenate(([True], np.diff(points) > MERGE_TOL))
    return points[keep]


def transition_row(x, a, target: Grid) -> TransitionRow:
    """Exact cell distribution of ``x + a * eps`` over ``target``.

    Parameters
    ----------
    x : array_like, shape (m,)
        Current state.
    a : array_like, shape (m,)
        Noise direction (one column of the constraint matrix).
    target : Grid
        Partition of the next truncation box.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    box = target.box
    if x.shape != a.shape or x.shape != (target.dim,):
        raise ValueError("state, column and grid dimensions disagree")

    still = a == 0
    if np.any(still & ((x < box.lo) | (x > box.hi))):
        if np.all(still):
            raise ValueError(
                "zero noise column and state outside the target box"
            )
        raise ValueError(
            "state lies outside the target box in a zero-noise coordinate"
        )
    if np.all(still):
        return TransitionRow(np.array([project(target, x)]),
                             np.array([1.0]), 0.0)

    cuts = [np.array([-EPS_CUTOFF, EPS_CUTOFF])]
    for k in np.flatnonzero(~still):
        e = (target.breakpoints[k] - x[k]) / a[k]
        cuts.append(e[np.abs(e) < EPS_CUTOFF])
    eps = _merged(np.concatenate(cuts))

    left, right = eps[:-1], eps[1:]
    mass = interval_mass(left, right)
    mid = 0.5 * (left + right)
    pts = x[None, :] + mid[:, None] * a[None, :]
    inside = np.all((pts >= box.lo) & (pts <= box.hi), axis=1)

    escaped = 2.0 * float(ndtr(-EPS_CUTOFF)) + float(mass[~inside].sum())
    pts, mass = pts[inside], mass[inside]
    multi = []
    for k in range(target.dim):
        j = np.searchsorted(target.breakpoints[k], pts[:, k], side="right") - 1
        multi.append(np.clip(j, 0, target.counts[k] - 1))
    flat = np.ravel_multi_index(tuple(multi), target.counts)
    cells, inverse = np.unique(flat, return_inverse=True)
    probs = np.zeros(cells.size)
    np.add.at(probs, inverse, mass)
    keep = probs > 0
    return TransitionRow(cells[keep], probs[keep], escaped)


def smoothing_region_mass(x, a, b, lam: float) -> float:
    """Mass that ``x + a * eps`` puts on the smoothing region.

    The region is where the ramp product differs from the sharp indicator
    of ``y < b``. The sweep cuts the noise line at every slab face
    ``b_i - 1/lambda`` and ``b_i`` and classifies each piece by its midpoint.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    s = SmoothingParams(lam, b)
    cuts = [np.array([-EPS_CUTOFF, EPS_CUTOFF])]
    moving = a != 0
    for face in (s.b - 1.0 / lam, s.b):
        e = (face[moving] - x[moving]) / a[moving]
        cuts.append(e[np.abs(e) < EPS_CUTOFF])
    eps = _merged(np.concatenate(cuts))
    left, right = eps[:-1], eps[1:]
    mid = 0.5 * (left + right)
    pts = x[None, :] + mid[:, None] * a[None, :]
    hit = in_smoothing_region(pts, s)
    return float(interval_mass(left[hit], right[hit]).sum())
