"""Radial shooting for the field-free limiting groundstate.

Solves ``-w'' - w'/r + V w = w^(p-1)``, ``w'(0) = 0``, ``w -> 0`` in the plane by
bisection on the central amplitude.  Used as an independent check on the grid
minimizer; it shares no code with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp


@dataclass(frozen=True)
class RadialProfile:
    p: float
    v_star: float
    amplitude: float
    r: np.ndarray
    w: np.ndarray
    mass: float  # int |w|^2 over the plane
    lp: float  # int |w|^p over the plane

    @property
    def s_value(self) -> float:
        # on the Nehari manifold the numerator equals lp
        return self.lp ** (1 - 2 / self.p)

    @property
    def energy(self) -> float:
        return (0.5 - 1 / self.p) * self.lp

    def __call__(self, r):
        return np.interp(r, self.r, self.w, right=0.0)


def _shoot(a, p, r_max):
    r0 = 1e-8

    def rhs(r, y):
        w, dw, _, _ = y
        wp = abs(w) ** (p - 2) * w
        return [dw, -dw / r + w - wp, 2 * math.pi * r * w * w, 2 * math.pi * r * abs(w) ** p]

    def crossed(r, y):
        return y[0]

    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]

    turned.terminal = True
    turned.direction = 1

    dw0 = -0.5 * (a - a ** (p - 1)) * r0
    return solve_ivp(
        rhs, (r0, r_max), [a, dw0, 0.0, 0.0], events=(crossed, turned),
        rtol=1e-12, atol=1e-14, dense_output=True,
    )


@lru_cache(maxsize=16)
def _unit_profile(p, r_max):
    lo, hi = 1.0, 1.0
    # bracket: small amplitudes undershoot, large ones cross zero
    while True:
        sol = _shoot(hi, p, r_max)
        if sol.t_events[0].size:
            break
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        sol = _shoot(mid, p, r_max)
        if sol.t_events[0].size:
            hi = mid
        else:
            lo = mid
    a = lo
    sol = _shoot(a, p, r_max)
    r_end = sol.t[-1]
    r = np.linspace(sol.t[0], r_end, 4001)
    y = sol.sol(r)
    w = np.clip(y[0], 0.0, None)
    mass, lp = y[2, -1], y[3, -1]
    return a, r, w, mass, lp


def radial_groundstate(p: float = 4.0, v_star: float = 1.0, r_max: float = 40.0) -> RadialProfile:
    """Positive radial groundstate for ``(V*, B* = 0)``."""
    if p <= 2:
        raise ValueError("p must exceed 2")
    a, r, w, mass, lp = _unit_profile(float(p), float(r_max))
    # rescale the V* = 1 profile: w_V(r) = V^(1/(p-2)) w(sqrt(V) r)
    k = v_star ** (1 / (p - 2))
    s = math.sqrt(v_star)
    mass_v = k**2 * mass / s**2
    lp_v = k**p * lp / s**2
    return RadialProfile(p, v_star, k * a, np.concatenate([[0.0], r / s]), k * np.concatenate([[a], w]),
                         mass_v, lp_v)
