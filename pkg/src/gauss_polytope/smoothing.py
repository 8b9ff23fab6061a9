"""Ramp-smoothed polytope indicator and the Lipschitz constants built on it.

The terminal cost of the chain is the sharp indicator of ``y < b``. It is
replaced by a product of per-coordinate ramps that drop linearly from 1 to
0 over ``(b_i - 1/lambda, b_i)``, which makes it ``2 lambda m``-Lipschitz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SmoothingParams:
    lam: float
    b: np.ndarray

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError("lambda must exceed 1")
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))

    @property
    def m(self) -> int:
        return self.b.size


def ramp_factors(x, s: SmoothingParams):
    """Per-coordinate ramps ``clip(-lambda (x_i - b_i), 0, 1)``.

    At the two ramp ends the value is taken by continuity (1 and 0).
    """
    x = np.asarray(x, dtype=float)
    return np.clip(-s.lam * (x - s.b), 0.0, 1.0)


def g_eval(x, s: SmoothingParams):
    """Smoothed indicator; ``x`` may carry leading batch dimensions."""
    return np.prod(ramp_factors(x, s), axis=-1)


def in_smoothing_region(x, s: SmoothingParams):
    """True where the smoothed indicator differs from ``1{x < b}``."""
    x = np.asarray(x, dtype=float)
    sharp = np.all(x < s.b, axis=-1).astype(float)
    return g_eval(x, s) != sharp


def lipschitz_h_tilde(lam: float, m: int, L_f1: float = 0.0, L_f2: float = 0.0,
                      f1_sup: float = 1.0, f2_sup: float = 0.0) -> float:
    """Lipschitz constant of ``f1 g + f2 (1 - g)``.

    Defaults are the polytope instance: ``f1 = 1``, ``f2 = 0``.
    """
    return L_f1 + L_f2 + 2.0 * lam * m * max(f1_sup, f2_sup)


@dataclass
class LipschitzLedger:
    """Constants of a smoothed chain and the cost-to-go Lipschitz sequence.

    ``L_J_tilde[t]`` is the Lipschitz constant of the smoothed cost-to-go at
    time ``t``; the polytope instance has ``L_c = L_psi = L_h = 0`` and
    ``L_q = 1``.
    """

    L_h_tilde: float
    L_J_tilde: np.ndarray
    L_c: float = 0.0
    L_psi: float = 0.0
    L_q: float = 1.0
    L_h: float = 0.0
    L_f1: float = 0.0
    L_f2: float = 0.0
    f1_sup: float = 1.0
    f2_sup: float = 0.0

    @property
    def T(self) -> int:
        return len(self.L_J_tilde) - 1

    def beta_coefficient(self, t: int = 0) -> float:
        """Multiplier of ``beta`` in the discretization error at time ``t``."""
        tail = sum(self.L_J_tilde[t + i - 1] for i in range(1, self.T - t + 1))
        return self.L_h + self.L_h_tilde + tail


def lipschitz_J_tilde(t: int, T: int, lam: float, m: int, L_c: float = 0.0,
                      L_psi: float = 0.0, L_q: float = 1.0, L_h: float = 0.0,
                      L_f1: float = 0.0, L_f2: float = 0.0, f1_sup: float = 1.0,
                      f2_sup: float = 0.0) -> float:
    """Closed-form Lipschitz constant of the smoothed cost-to-go at ``t``."""
    if not 0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    rate = L_q * (1.0 + L_psi)
    bracket = lipschitz_h_tilde(lam, m, L_f1, L_f2, f1_sup, f2_sup) + L_h
    steps = T - t
    geometric = sum(rate ** (i - 1) for i in range(1, steps + 1))
    return rate**steps * bracket + L_c * (1.0 + L_psi) * geometric


def lipschitz_J_recursion(T: int, lam: float, m: int, L_c: float = 0.0,
                          L_psi: float = 0.0, L_q: float = 1.0, L_h: float = 0.0,
                          L_f1: float = 0.0, L_f2: float = 0.0,
                          f1_sup: float = 1.0, f2_sup: float = 0.0) -> np.ndarray:
    """Backward recursion ``L_t = (L_c + L_q L_{t+1}) (1 + L_psi)``."""
    out = np.empty(T + 1)
    out[T] = lipschitz_h_tilde(lam, m, L_f1, L_f2, f1_sup, f2_sup) + L_h
    for t in range(T - 1, -1, -1):
        out[t] = (L_c + L_q * out[t + 1]) * (1.0 + L_psi)
    return out


def build_ledger(lam: float, m: int, T: int, **constants) -> LipschitzLedger:
    """Ledger for a chain of horizon ``T`` on ``R^m``."""
    L_J = np.array([lipschitz_J_tilde(t, T, lam, m, **constants)
                    for t in range(T + 1)])
    keep = {k: v for k, v in constants.items()
            if k in ("L_f1", "L_f2", "f1_sup", "f2_sup")}
    L_h_tilde = lipschitz_h_tilde(lam, m, **keep)
    return LipschitzLedger(L_h_tilde=L_h_tilde, L_J_tilde=L_J, **constants)
