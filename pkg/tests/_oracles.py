"""Independent numerical oracles shared by the tests."""

import math


def simpson(f, a, b, tol=1e-12, depth=60):
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``."""
    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth)


def phi(e):
    return math.exp(-0.5 * e * e) / math.sqrt(2 * math.pi)


def cell_mass(x, a, lo, hi, cut=12.0):
    """Normal mass of ``eps`` with ``x + a eps`` in the closed cell ``[lo, hi]``.

    The preimage is an interval; Simpson integrates the density over it.
    """
    e_lo, e_hi = -cut, cut
    for k in range(len(x)):
        if a[k] == 0:
            if not lo[k] <= x[k] <= hi[k]:
                return 0.0
            continue
        u, v = sorted(((lo[k] - x[k]) / a[k], (hi[k] - x[k]) / a[k]))
        e_lo, e_hi = max(e_lo, u), min(e_hi, v)
    return simpson(phi, e_lo, e_hi)
