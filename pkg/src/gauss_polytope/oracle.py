"""Independent estimators of ``P(A z <= b)``, ``z ~ N(0, I_T)``.

``mc_estimate`` samples with numpy's PCG64 generator seeded by the caller,
in fixed-size chunks so results depend only on ``(problem, samples, seed)``.
``quadrature_estimate`` integrates the innermost coordinate in closed form
and the outer ones with adaptive Gauss-Kronrod quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kernel import interval_mass
from .preprocess import PolytopeProblem

MC_CHUNK = 2**18
QUAD_RANGE = 9.0


@dataclass
class McResult:
    estimate: float
    std_error: float
    samples: int
    seed: int


def mc_estimate(p: PolytopeProblem, samples: int, seed: int = 42) -> McResult:
    """Fraction of ``samples`` standard normal draws inside the polytope."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    hits = 0
    remaining = samples
    while remaining:
        n = min(MC_CHUNK, remaining)
        z = rng.standard_normal((n, p.T))
        hits += int(np.count_nonzero(p.contains(z)))
        remaining -= n
    est = hits / samples
    return McResult(est, math.sqrt(est * (1.0 - est) / samples), samples, seed)


def _last_interval(a, b):
    """Interval of ``y`` with ``a * y <= b`` for every row, as ``(lo, hi)``."""
    lo, hi = -np.inf, np.inf
    for ai, bi in zip(a, b):
        if ai > 0:
            hi = min(hi, bi / ai)
        elif ai < 0:
            lo = max(lo, bi / ai)
        elif bi < 0:
            return 0.0, 0.0
    return lo, hi


def _kinks(A, b):
    """Outer-variable values where the inner integrand changes form."""
    a0, rest = A[:, 0], A[:, 1:]
    pts = []
    if rest.shape[1] == 1:
        # bound_i(z) = (b_i - a0_i z) / r_i; kinks where two bounds meet
        r = rest[:, 0]
        for i in range(len(r)):
            if r[i] == 0 and a0[i] != 0:
                pts.append(b[i] / a0[i])
            for j in range(i + 1, len(r)):
                if r[i] == 0 or r[j] == 0:
                    continue
                den = a0[i] / r[i] - a0[j] / r[j]
                if den != 0:
                    pts.append((b[i] / r[i] - b[j] / r[j]) / den)
    else:
        for i in np.flatnonzero(np.all(rest == 0, axis=1)):
            if a0[i] != 0:
                pts.append(b[i] / a0[i])
    pts = [z for z in pts if -QUAD_RANGE < z < QUAD_RANGE]
    return sorted(set(pts))


def _mass(A, b, tol):
    if A.shape[1] == 1:
        lo, hi = _last_interval(A[:, 0], b)
        return float(interval_mass(lo, hi))
    phi = 1.0 / math.sqrt(2.0 * math.pi)

    def inner(z):
        return phi * math.exp(-0.5 * z * z) * _mass(A[:, 1:], b - A[:, 0] * z, tol)

    points = _kinks(A, b)
    value, _ = integrate.quad(inner, -QUAD_RANGE, QUAD_RANGE, epsabs=tol,
                              epsrel=0.0, limit=500, points=points or None)
    return value


def quadrature_estimate(p: PolytopeProblem, tol: float = 1e-8) -> float:
    """Nested quadrature of the polytope mass; ``T`` at most 3."""
    if p.T > 3:
        raise ValueError("quadrature oracle supports T <= 3 only")
    return _mass(p.A, p.b, tol / 10.0)
