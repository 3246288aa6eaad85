"""End-to-end experiments: epsilon sweeps, decay fits, force balance, invariant battery."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .concentration import (
    ReducedTable,
    build_reduced_table,
    concentration_at,
    curl_at,
    required_b_range,
    scan_concentration,
    table_grid,
)
from .errors import DomainError, MagnlsError
from .grid import ComplexField
from .instance import ProblemInstance
from .limiting import LimitingSpec, SolverConfig, charge_and_moment, minimize_quotient, nehari_profile
from .penalized import (
    PenalizedConfig,
    PenalizedProblem,
    PenalizedSpec,
    demodulate,
    domain_grid,
    make_test_family,
    off_peak_sup,
    solve_penalized,
)

log = logging.getLogger(__name__)


# -- decay -----------------------------------------------------------------------


def decay_fit(u: ComplexField, x_eps, eps: float, annulus: tuple[float, float], min_nodes: int = 20):
    """Fit ``log|u| = c - lambda * (1/eps) r/(1+r)`` on the annulus ``r1 <= r <= r2``.

    Returns ``(lambda_hat, r_squared)``.  A constant field gives slope 0 and,
    by convention, ``r_squared = 1``.
    """
    r1, r2 = map(float, annulus)
    if not 0 <= r1 < r2:
        raise DomainError(f"bad annulus {annulus}")
    g = u.grid
    X, Y = g.mesh()
    r = np.hypot(X - x_eps[0], Y - x_eps[1])
    m = np.abs(u.values)
    sel = (r >= r1) & (r <= r2) & (m > 1e-14)
    if int(sel.sum()) < min_nodes:
        raise DomainError(f"only {int(sel.sum())} usable nodes in the annulus, need {min_nodes}")
    z = -(r[sel] / (1 + r[sel])) / eps
    ylog = np.log(m[sel])
    design = np.column_stack([np.ones_like(z), z])
    coef, *_ = np.linalg.lstsq(design, ylog, rcond=None)
    resid = ylog - design @ coef
    ss_tot = float(np.sum((ylog - ylog.mean()) ** 2))
    r_squared = 1.0 if ss_tot <= 1e-28 * max(1.0, float(np.sum(ylog**2))) else 1 - float(np.sum(resid**2)) / ss_tot
    return float(coef[1]), float(r_squared)


# -- epsilon sweep ---------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    R: float = 10.0
    annulus: tuple = (5.0, 15.0)  # in units of eps
    nodes_per_eps: int = 8
    map_resolution: int = 41
    table_step: float = 0.25
    beta: float = 1.0
    mu_pen: float = 0.5
    x0: tuple | None = None
    rho: float | None = None
    rho0: float | None = None
    limiting: SolverConfig = field(default_factory=SolverConfig)
    penalized: PenalizedConfig = field(default_factory=PenalizedConfig)
    seed: int = 0


@dataclass
class SweepReport:
    eps_values: list
    energies_scaled: list
    peaks: list
    off_peak_sups: list
    target_inf_C: float
    decay_rates: list
    decay_r2: list = field(default_factory=list)
    peak_heights: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    argmin_C: tuple = (math.nan, math.nan)
    solutions: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.eps_values, self.eps_values[1:])):
            raise DomainError("eps values must be strictly decreasing")

    @property
    def ok(self) -> bool:
        return not self.failures and all(self.converged)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("solutions")
        d["argmin_C"] = list(self.argmin_C)
        d["peaks"] = [list(p) for p in self.peaks]
        return d


def map_argmin(instance: ProblemInstance, table: ReducedTable, resolution: int):
    """Argmin of the sampled map; among exact ties the sample deepest inside the set."""
    cmap = scan_concentration(instance, resolution, table)
    tied = np.flatnonzero(cmap.values <= cmap.argmin_value * (1 + 1e-12))
    depth = [
        max(r.distance_to_boundary(cmap.sample_points[k]) for r in instance.lambda_region)
        for k in tied
    ]
    k = int(tied[int(np.argmax(depth))])
    return (float(cmap.sample_points[k, 0]), float(cmap.sample_points[k, 1])), cmap


def table_for(instance: ProblemInstance, resolution: int, config: SolverConfig, step: float = 0.25,
              seed: int = 0) -> ReducedTable:
    """Reduced table covering every ``|B/V|`` met by a scan at ``resolution``."""
    _, hi = required_b_range(instance, resolution)
    return build_reduced_table(instance.p, table_grid(hi, step), config, seed)


def limiting_profile_at(instance: ProblemInstance, x, config: SolverConfig, seed: int = 0):
    v = float(instance.V(*x))
    b = curl_at(instance.A, x, domain=instance.domain)
    res = minimize_quotient(LimitingSpec(v, b, instance.p), config=config, seed=seed)
    return res


def epsilon_sweep(instance: ProblemInstance, eps_list, config: SweepConfig | None = None,
                  table: ReducedTable | None = None) -> SweepReport:
    """Spike solutions for decreasing ``eps``, each warm-started from the last.

    The first solve starts from the limiting groundstate at the map argmin;
    later ones start from the previous solution rescaled about its peak.
    Failed solves are recorded and the sweep moves on.
    """
    config = config or SweepConfig()
    eps_list = [float(e) for e in eps_list]
    table = table or table_for(instance, config.map_resolution, config.limiting, config.table_step, config.seed)
    x_star, cmap = map_argmin(instance, table, config.map_resolution)
    report = SweepReport(eps_list, [], [], [], float(cmap.argmin_value), [], argmin_C=x_star)
    base = limiting_profile_at(instance, x_star, config.limiting, config.seed)
    profile, center, x_prev = nehari_profile(base), None, x_star
    for eps in eps_list:
        spec = PenalizedSpec(instance, eps, config.x0, config.rho, config.rho0, config.beta, config.mu_pen)
        try:
            problem = PenalizedProblem(spec, domain_grid(instance, eps, config.nodes_per_eps))
            init = make_test_family(x_prev, profile, eps, instance, problem.grid, center=center)
            sol = solve_penalized(spec, init, config.penalized, problem)
        except MagnlsError as exc:
            report.failures.append({"eps": eps, "error": f"{type(exc).__name__}: {exc}"})
            for name in ("energies_scaled", "off_peak_sups", "decay_rates", "decay_r2", "peak_heights",
                         "residuals"):
                getattr(report, name).append(math.nan)
            report.peaks.append((math.nan, math.nan))
            report.iterations.append(0)
            report.converged.append(False)
            report.solutions.append(None)
            continue
        if not sol.converged:
            report.failures.append({"eps": eps, "error": sol.diagnostic})
        try:
            lam, r2 = decay_fit(sol.u, sol.peak, eps, (config.annulus[0] * eps, config.annulus[1] * eps))
        except DomainError:
            lam, r2 = math.nan, math.nan
        report.energies_scaled.append(sol.energy_scaled)
        report.peaks.append(sol.peak)
        report.peak_heights.append(sol.peak_height)
        report.off_peak_sups.append(off_peak_sup(sol.u, sol.peak, config.R, eps))
        report.decay_rates.append(lam)
        report.decay_r2.append(r2)
        report.residuals.append(sol.residual)
        report.iterations.append(sol.iterations)
        report.converged.append(sol.converged)
        report.solutions.append(sol)
        # warm start: the solution seen from its peak in rescaled coordinates
        profile = demodulate(sol.u, sol.peak, eps, instance)
        center, x_prev = (0.0, 0.0), sol.peak
    return report


# -- force balance ---------------------------------------------------------------


@dataclass(frozen=True)
class LorentzReport:
    force_residual: float
    grad_C: tuple
    force: tuple
    q: float
    mu: float
    grad_V: tuple
    grad_B: tuple

    @property
    def cosine(self) -> float:
        """Cosine between the force and the gradient of C (nan if either vanishes)."""
        f, g = np.array(self.force), np.array(self.grad_C)
        nf, ng = np.linalg.norm(f), np.linalg.norm(g)
        return float(f @ g / (nf * ng)) if nf > 0 and ng > 0 else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cosine"] = self.cosine
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def lorentz_balance(instance: ProblemInstance, x_star, table: ReducedTable, fd_step: float = 1e-3,
                    config: SolverConfig | None = None, seed: int = 0) -> LorentzReport:
    """Dipole force ``q grad V + mu grad B`` at ``x_star`` and the gradient of C there.

    Both vanish at an interior minimum of C; away from one they are parallel,
    since ``dE/dV = q/2`` and ``dE/dB = mu/2``.
    """
    x1, x2 = map(float, x_star)
    d = instance.domain
    if not (d.xmin < x1 - fd_step and x1 + fd_step < d.xmax and d.ymin < x2 - fd_step and x2 + fd_step < d.ymax):
        raise DomainError(f"difference stencil at {x_star} with step {fd_step} leaves the domain")
    res = limiting_profile_at(instance, (x1, x2), config or SolverConfig(), seed)
    cm = charge_and_moment(res)

    def central(f):
        return ((f((x1 + fd_step, x2)) - f((x1 - fd_step, x2))) / (2 * fd_step),
                (f((x1, x2 + fd_step)) - f((x1, x2 - fd_step))) / (2 * fd_step))

    gV = central(lambda x: float(instance.V(*x)))
    gB = central(lambda x: curl_at(instance.A, x, domain=d))
    gC = central(lambda x: concentration_at(x, instance, table))
    F = (cm.q * gV[0] + cm.mu * gB[0], cm.q * gV[1] + cm.mu * gB[1])
    scale = cm.q * math.hypot(*gV) + abs(cm.mu) * math.hypot(*gB) + np.finfo(float).tiny
    return LorentzReport(math.hypot(*F) / scale, gC, F, cm.q, cm.mu, gV, gB)
