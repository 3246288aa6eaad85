"""Penalized semiclassical problem on a bounded rectangle.

Outside the concentration set the nonlinearity is capped by ``eps^2 mu H``,
with ``H`` a Hardy-type weight centred at ``x0``.  Spikes are computed as
minimizers of the functional over its Nehari-type set, which is the
mountain-pass level for this class of nonlinearities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from .errors import DomainError, SupportOverflowError
from .grid import ComplexField, Grid2D, RealField, VectorPotentialField, magnetic_energy, magnetic_operator
from .instance import ProblemInstance

log = logging.getLogger(__name__)

NODES_PER_EPS = 8


@dataclass(frozen=True, eq=False)
class PenalizedSpec:
    """Penalization data.  ``None`` selects the defaults: ``rho`` is half the
    distance from ``x0`` to the boundary of its rectangle of the concentration
    set, ``rho0 = rho / 2``."""

    instance: ProblemInstance
    eps: float
    x0: tuple | None = None
    rho: float | None = None
    rho0: float | None = None
    beta: float = 1.0
    mu_pen: float = 0.5

    def __post_init__(self):
        inst = self.instance
        x0 = self.x0 if self.x0 is not None else inst.lambda_region[0].center
        x0 = (float(x0[0]), float(x0[1]))
        object.__setattr__(self, "x0", x0)
        rect = inst.lambda_containing(x0)
        dist = rect.distance_to_boundary(x0)
        rho = 0.5 * dist if self.rho is None else float(self.rho)
        rho0 = 0.5 * rho if self.rho0 is None else float(self.rho0)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "rho0", rho0)
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not rho > 0 or rho >= dist:
            raise DomainError(f"closed ball B({x0}, {rho}) must lie inside the concentration set")
        if not 0 < rho0 < rho:
            raise DomainError(f"need 0 < rho0 < rho, got rho0={rho0}, rho={rho}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not 0 < self.mu_pen < 1:
            raise DomainError(f"mu_pen must lie in (0, 1), got {self.mu_pen}")

    @property
    def p(self) -> float:
        return self.instance.p

    def with_eps(self, eps: float) -> "PenalizedSpec":
        return PenalizedSpec(self.instance, eps, self.x0, self.rho, self.rho0, self.beta, self.mu_pen)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "x0": list(self.x0), "rho": self.rho, "rho0": self.rho0,
                "beta": self.beta, "mu_pen": self.mu_pen}


# -- pointwise nonlinearity ------------------------------------------------------


def hardy_weight(r, spec: PenalizedSpec):
    """``(log rho/rho0)^beta / (4 r^2 (log r/rho0)^(2+beta))``, meaningful for ``r > rho0``."""
    r = np.asarray(r, float)
    num = math.log(spec.rho / spec.rho0) ** spec.beta
    return num / (4 * r**2 * np.log(r / spec.rho0) ** (2 + spec.beta))


def penalization_H(x, y, spec: PenalizedSpec):
    """Zero on the concentration set, the Hardy weight in ``|x - x0|`` outside it."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    inside = spec.instance.in_lambda(x, y)
    r = np.hypot(x - spec.x0[0], y - spec.x0[1])
    out = np.zeros(x.shape)
    # outside the set r > rho > rho0, so the logarithm is positive
    out[~inside] = hardy_weight(r[~inside], spec)
    return out if out.ndim else float(out)


def _cap(x, y, spec: PenalizedSpec):
    """``(inside, eps^2 mu H)`` at the given points."""
    inside = np.asarray(spec.instance.in_lambda(x, y))
    weight = spec.eps**2 * spec.mu_pen * np.asarray(penalization_H(x, y, spec))
    return inside, weight


def g_core(s, inside, weight, p):
    s = np.asarray(s, complex)
    rate = np.abs(s) ** (p - 2)
    return np.where(inside, rate, np.minimum(weight, rate)) * s


def G_core(s, inside, weight, p):
    """Primitive ``int_0^|s| min(w t, t^(p-1)) dt`` outside, ``|s|^p / p`` inside."""
    m = np.abs(np.asarray(s))
    full = m**p / p
    # below tbar the power branch is the smaller one, above it the linear cap
    tbar = np.asarray(weight, float) ** (1 / (p - 2))
    capped = np.where(m <= tbar, full, tbar**p / p + 0.5 * weight * (m**2 - tbar**2))
    return np.where(inside, full, capped)


def g_eps(x, y, s, spec: PenalizedSpec):
    inside, weight = _cap(x, y, spec)
    return g_core(s, inside, weight, spec.p)


def G_eps(x, y, s, spec: PenalizedSpec):
    inside, weight = _cap(x, y, spec)
    return G_core(s, inside, weight, spec.p)


# -- discretized problem ---------------------------------------------------------


def domain_grid(instance: ProblemInstance, eps: float, nodes_per_eps: int = NODES_PER_EPS) -> Grid2D:
    """Grid on the domain with spacing at most ``eps / nodes_per_eps``."""
    d = instance.domain
    nx = math.ceil((d.xmax - d.xmin) * nodes_per_eps / eps - 1e-9) - 1
    ny = math.ceil((d.ymax - d.ymin) * nodes_per_eps / eps - 1e-9) - 1
    return Grid2D.box(d.xmin, d.xmax, d.ymin, d.ymax, nx, ny)


class PenalizedProblem:
    """Spec plus grid, with the sampled coefficients and the factorized operator."""

    def __init__(self, spec: PenalizedSpec, grid: Grid2D | None = None):
        self.spec = spec
        self.grid = grid or domain_grid(spec.instance, spec.eps)
        X, Y = self.grid.mesh()
        inst = spec.instance
        self.V = RealField(self.grid, inst.V(X, Y) * np.ones(X.shape))
        self.A = VectorPotentialField.from_function(self.grid, inst.A)
        inside, weight = _cap(X, Y, spec)
        self.inside = inside.ravel()
        self.weight = weight.ravel()
        self.has_outside = not bool(self.inside.all())
        self._K = None
        self._lu = None

    @property
    def p(self) -> float:
        return self.spec.p

    @property
    def eps(self) -> float:
        return self.spec.eps

    @property
    def K(self):
        if self._K is None:
            self._K = magnetic_operator(self.A, self.V, self.eps)
        return self._K

    @property
    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.K)
        return self._lu

    def field(self, flat) -> ComplexField:
        return ComplexField(self.grid, np.asarray(flat).reshape(self.grid.shape))

    def quadratic(self, u: ComplexField) -> float:
        """``int eps^2 |D u|^2 + V |u|^2``."""
        return magnetic_energy(u, self.A, self.V, self.eps)

    def g(self, flat):
        return g_core(flat, self.inside, self.weight, self.p)

    def G_integral(self, flat) -> float:
        return self.grid.cell_area * float(np.sum(G_core(flat, self.inside, self.weight, self.p)))

    def nonlinear_pairing(self, flat) -> float:
        """``int <u, g(u)>``."""
        return self.grid.cell_area * float(np.real(np.vdot(flat, self.g(flat))))

    def functional(self, u: ComplexField) -> float:
        return 0.5 * self.quadratic(u) - self.G_integral(u.flat)

    def original_functional(self, u: ComplexField) -> float:
        return 0.5 * self.quadratic(u) - self.grid.cell_area * float(np.sum(np.abs(u.values) ** self.p)) / self.p

    def derivative(self, u: ComplexField) -> np.ndarray:
        """L2 representative of the derivative: ``<G'(u), w> = cell_area Re(d^H w)``."""
        return self.K @ u.flat - self.g(u.flat)

    def nehari_pairing(self, u: ComplexField) -> float:
        """``<G'(u), u>``."""
        return self.quadratic(u) - self.nonlinear_pairing(u.flat)

    def nehari_factor(self, flat, q: float | None = None) -> float:
        """Positive ``t`` with ``<G'(t u), t u> = 0``, or ``nan`` if no root in ``[1e-6, 1e6]``."""
        if q is None:
            q = self.grid.cell_area * float(np.real(np.vdot(flat, self.K @ flat)))
        m2 = np.abs(flat) ** 2
        w = self.grid.cell_area
        if not self.has_outside:
            lp = w * float(np.sum(m2 ** (self.p / 2)))
            return (q / lp) ** (1 / (self.p - 2)) if lp > 0 else math.nan
        mod = np.sqrt(m2)

        def phi(log_t):
            rate = (math.exp(log_t) * mod) ** (self.p - 2)
            rate = np.where(self.inside, rate, np.minimum(self.weight, rate))
            return q - w * float(np.sum(rate * m2))

        lo, hi = math.log(1e-6), math.log(1e6)
        f_lo, f_hi = phi(lo), phi(hi)
        if not (f_lo > 0 and f_hi < 0):
            return math.nan
        return math.exp(brentq(phi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))

    def ray_maximum(self, u: ComplexField, penalized: bool = True) -> float:
        """``sup_{t > 0}`` of the functional along ``t u``."""
        q = self.quadratic(u)
        if not penalized:
            lp = self.grid.cell_area * float(np.sum(np.abs(u.values) ** self.p))
            p = self.p
            return (0.5 - 1 / p) * q ** (p / (p - 2)) / lp ** (2 / (p - 2))
        t = self.nehari_factor(u.flat, q)
        if math.isnan(t):
            return math.inf
        return self.functional(u.scaled(t))


def penalized_functional(u: ComplexField, spec: PenalizedSpec) -> float:
    return PenalizedProblem(spec, u.grid).functional(u)


def original_functional(u: ComplexField, spec: PenalizedSpec) -> float:
    return PenalizedProblem(spec, u.grid).original_functional(u)


# -- test family -----------------------------------------------------------------


def _jacobian(A, x_star, h=1e-5):
    """``M[i, j] = d_j A_i`` at ``x_star`` by central differences."""
    x1, x2 = x_star
    ap = np.array(A(x1 + h, x2), float)
    am = np.array(A(x1 - h, x2), float)
    bp = np.array(A(x1, x2 + h), float)
    bm = np.array(A(x1, x2 - h), float)
    return np.column_stack([(ap - am) / (2 * h), (bp - bm) / (2 * h)])


def gauge_phase(instance: ProblemInstance, x_star, eps: float, X, Y):
    """Phase ``theta`` with ``u = exp(-i theta) v((x - x*)/eps)`` for a profile
    ``v`` computed in the symmetric gauge about its own centre."""
    a = np.array(instance.A(*x_star), float)
    M = _jacobian(instance.A, x_star)
    S = 0.5 * (M + M.T)
    y1 = (X - x_star[0]) / eps
    y2 = (Y - x_star[1]) / eps
    lin = (a[0] * (X - x_star[0]) + a[1] * (Y - x_star[1])) / eps**2
    quad = 0.5 * (S[0, 0] * y1**2 + 2 * S[0, 1] * y1 * y2 + S[1, 1] * y2**2)
    return lin + quad


def _profile_interpolator(profile: ComplexField):
    g = profile.grid
    nx, ny = g.n
    hx, hy = g.h
    xs = g.origin[0] + hx * np.arange(nx + 2)
    ys = g.origin[1] + hy * np.arange(ny + 2)
    vals = np.pad(profile.values, 1)
    return RegularGridInterpolator((xs, ys), vals, bounds_error=False, fill_value=0.0)


def make_test_family(
    x_star,
    v_profile: ComplexField,
    eps: float,
    instance: ProblemInstance,
    grid: Grid2D | None = None,
    overflow_tol: float = 1e-3,
    center=None,
) -> ComplexField:
    """Phase-modulated rescaling of ``v_profile`` placed at ``x_star``.

    The profile's coordinates are taken relative to ``center`` (default: its
    grid centre), where its gauge is symmetric.  Raises
    ``SupportOverflowError`` when the part of the profile mapped outside the
    domain exceeds ``overflow_tol`` times its peak.
    """
    x_star = (float(x_star[0]), float(x_star[1]))
    if not np.any(instance.in_lambda(*x_star)):
        raise DomainError(f"x* = {x_star} is not inside the concentration set")
    grid = grid or domain_grid(instance, eps)
    pg = v_profile.grid
    cx, cy = pg.center if center is None else center
    # profile nodes that would land outside the domain
    PX, PY = pg.mesh()
    mx = x_star[0] + eps * (PX - cx)
    my = x_star[1] + eps * (PY - cy)
    mag = np.abs(v_profile.values)
    outside = ~instance.domain.contains(mx, my, strict=True)
    peak = float(mag.max())
    if peak == 0.0:
        raise DomainError("profile is identically zero")
    if outside.any() and mag[outside].max() > overflow_tol * peak:
        raise SupportOverflowError(
            f"profile scaled by eps = {eps:g} at {x_star} leaves the domain "
            f"({mag[outside].max() / peak:.2e} of its peak)"
        )
    X, Y = grid.mesh()
    Y1 = cx + (X - x_star[0]) / eps
    Y2 = cy + (Y - x_star[1]) / eps
    vals = _profile_interpolator(v_profile)(np.stack([Y1, Y2], axis=-1))
    theta = gauge_phase(instance, x_star, eps, X, Y)
    return ComplexField(grid, np.exp(-1j * theta) * vals)


def demodulate(u: ComplexField, x_star, eps: float, instance: ProblemInstance) -> ComplexField:
    """Inverse of ``make_test_family``: the profile on the rescaled grid with
    coordinates ``(x - x*) / eps``, so that its centre argument is the origin."""
    g = u.grid
    X, Y = g.mesh()
    theta = gauge_phase(instance, x_star, eps, X, Y)
    origin = ((g.origin[0] - x_star[0]) / eps, (g.origin[1] - x_star[1]) / eps)
    yg = Grid2D(origin, (g.extent[0] / eps, g.extent[1] / eps), g.n)
    return ComplexField(yg, np.exp(1j * theta) * u.values)


def family_ray_sup(x_star, v_profile: ComplexField, spec: PenalizedSpec, penalized: bool = False,
                    problem: PenalizedProblem | None = None) -> float:
    """``eps^-2 sup_t F(t u_eps)`` for the test family (original functional by default)."""
    problem = problem or PenalizedProblem(spec)
    u = make_test_family(x_star, v_profile, spec.eps, spec.instance, problem.grid)
    return problem.ray_maximum(u, penalized=penalized) / spec.eps**2


# -- solver ----------------------------------------------------------------------


@dataclass(frozen=True)
class PenalizedConfig:
    tol: float = 1e-5
    max_iter: int = 2000
    step_init: float = 1.0
    step_min: float = 1e-2
    step_max: float = 1e2
    armijo: float = 1e-4


@dataclass(frozen=True, eq=False)
class SpikeSolution:
    u: ComplexField
    energy_scaled: float  # eps^-2 G(u)
    peak: tuple
    peak_height: float
    residual: float
    converged: bool
    iterations: int = 0
    eps: float = 0.0
    diagnostic: str = ""
    history: np.ndarray = field(default=None, repr=False)

    def record(self) -> dict:
        return {
            "eps": self.eps,
            "energy_scaled": self.energy_scaled,
            "peak": list(self.peak),
            "peak_height": self.peak_height,
            "residual": self.residual,
            "converged": self.converged,
            "iterations": self.iterations,
            "diagnostic": self.diagnostic,
        }


def peak_of(u: ComplexField) -> tuple[tuple[float, float], float]:
    """Node of the largest modulus (first in row-major order on ties)."""
    m = np.abs(u.values)
    k = int(np.argmax(m))
    i, j = np.unravel_index(k, m.shape)
    return u.grid.node(int(i), int(j)), float(m[i, j])


def _failed(problem, u, it, residual, diagnostic, history):
    peak, height = peak_of(u)
    log.warning("penalized solve at eps=%g: %s", problem.eps, diagnostic)
    return SpikeSolution(u, math.nan, peak, height, residual, False, it, problem.eps, diagnostic,
                         np.array(history))


def solve_penalized(
    spec: PenalizedSpec,
    init: ComplexField,
    config: PenalizedConfig | None = None,
    problem: PenalizedProblem | None = None,
) -> SpikeSolution:
    """Critical point of the penalized functional from ``init``.

    Descent runs on the functional restricted to its Nehari-type set: each
    step moves along the preconditioned gradient ``u - K^-1 g(u)`` and is
    followed by the radial projection ``u <- t u``.  The step length comes
    from Armijo backtracking and a Barzilai-Borwein estimate.  The residual is
    the dual norm of the derivative relative to the energy norm of ``u``.
    """
    config = config or PenalizedConfig()
    problem = problem or PenalizedProblem(spec, init.grid)
    if init.grid != problem.grid:
        raise DomainError("initial field is not on the problem grid")
    K, lu, w = problem.K, problem.lu, problem.grid.cell_area
    v = init.flat.astype(complex)
    if not np.any(v):
        raise DomainError("initial field must be nonzero")

    def project(v):
        t = problem.nehari_factor(v)
        return None if math.isnan(t) else t * v

    def evaluate(v):
        Kv = K @ v
        gv = problem.g(v)
        q = w * float(np.real(np.vdot(v, Kv)))
        energy = 0.5 * q - problem.G_integral(v)
        grad = Kv - gv
        d = v - lu.solve(gv)
        dual = w * float(np.real(np.vdot(grad, d)))
        return energy, grad, d, math.sqrt(max(dual, 0.0) / q)

    history = []
    v = project(v)
    if v is None:
        return _failed(problem, init, 0, math.inf, "initial field has no Nehari point in [1e-6, 1e6]", history)
    energy, grad, d, residual = evaluate(v)
    history.append(energy)
    tau = config.step_init
    it = 0
    diagnostic = ""
    while residual > config.tol and it < config.max_iter:
        slope = w * float(np.real(np.vdot(grad, d)))
        while True:
            vn = project(v - tau * d)
            if vn is not None:
                en, gradn, dn, resn = evaluate(vn)
                if en <= energy - config.armijo * tau * slope:
                    break
            if tau <= 1e-10:
                break
            tau *= 0.5
        if vn is None:
            return _failed(problem, problem.field(v), it, residual,
                           "Nehari bisection has no bracket: iterate fell into the trivial regime", history)
        if en > energy:
            diagnostic = "no descent at machine precision"
            break
        s = vn - v
        sKs = w * float(np.real(np.vdot(s, K @ s)))
        sKy = w * float(np.real(np.vdot(s, gradn - grad)))
        tau = min(max(sKs / sKy, config.step_min), config.step_max) if sKy > 0 else config.step_init
        v, energy, grad, d, residual = vn, en, gradn, dn, resn
        history.append(energy)
        it += 1
    converged = residual <= config.tol
    if not converged and not diagnostic:
        diagnostic = f"iteration limit {config.max_iter} reached"
    u = problem.field(v)
    peak, height = peak_of(u)
    if not converged:
        log.warning("penalized solve at eps=%g: %s (residual %.3e)", spec.eps, diagnostic, residual)
    return SpikeSolution(u, energy / spec.eps**2, peak, height, residual, converged, it, spec.eps,
                         diagnostic, np.array(history))


def off_peak_sup(u: ComplexField, x_eps, R: float, eps: float) -> float:
    """``max |u|`` over nodes outside the closed ball ``B(x_eps, R eps)``; 0 if none."""
    X, Y = u.grid.mesh()
    far = np.hypot(X - x_eps[0], Y - x_eps[1]) > R * eps
    return float(np.abs(u.values)[far].max()) if far.any() else 0.0


def hardy_epsilon_bar(spec: PenalizedSpec, eps_values, n_fields: int = 10, seed: int = 0,
                      grid: Grid2D | None = None) -> float:
    """Largest tested ``eps`` such that ``int eps^2 H phi^2 <= int eps^2 |D phi|^2 + V phi^2``
    holds for every seeded real field and every tested ``eps`` below it."""
    eps_values = sorted(float(e) for e in eps_values)
    grid = grid or domain_grid(spec.instance, eps_values[-1], 2)
    X, Y = grid.mesh()
    H = np.asarray(penalization_H(X, Y, spec)) * np.ones(X.shape)
    V = RealField(grid, spec.instance.V(X, Y) * np.ones(X.shape))
    zero = VectorPotentialField.zero(grid)
    rng = np.random.default_rng(seed)
    fields = [ComplexField(grid, rng.standard_normal(grid.shape)) for _ in range(n_fields)]
    bar = 0.0
    for e in eps_values:
        ok = all(
            e**2 * grid.cell_area * float(np.sum(H * np.abs(f.values) ** 2)) <= magnetic_energy(f, zero, V, e)
            for f in fields
        )
        if not ok:
            break
        bar = e
    return bar
