"""Invariant battery: quick seeded checks of every module's structural properties.

Each invariant reports a measured number, a tolerance and a sense (``max``:
pass when measured <= tolerance, ``min``: pass when measured >= tolerance).
Grids are small so the whole battery runs in seconds; the tight-tolerance
versions live in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .concentration import build_reduced_table
from .errors import DomainError
from .grid import (
    ComplexField,
    Grid2D,
    RealField,
    VectorPotentialField,
    kinetic_energy,
    magnetic_energy,
    magnetic_operator,
    modulus_gradient_energy,
)
from .instance import ConstantV, ProblemInstance, QuadraticRadialFieldA, Rect
from .limiting import (
    LimitingSpec,
    SolverConfig,
    default_grid,
    landau_gauge_potential,
    minimize_quotient,
    nehari_defect,
    nehari_scale,
    symmetric_gauge_potential,
)
from .penalized import G_core, PenalizedProblem, PenalizedSpec, domain_grid, g_core, hardy_epsilon_bar, off_peak_sup

# name -> (sense, default tolerance)
DEFAULT_TOLERANCES = {
    "operator_energy_consistency": ("max", 1e-12),
    "operator_hermitian": ("max", 1e-12),
    "diamagnetic_inequality": ("max", 1e-12),
    "nehari_identity": ("max", 1e-10),
    "gauge_invariance": ("max", 0.02),
    "scaling_law": ("max", 0.02),
    "diamagnetic_strictness": ("min", 6e-6),
    "monotonicity_in_V": ("min", 2e-6),
    "continuity_of_E": ("max", 0.15),
    "g_properties": ("max", 1e-12),
    "G_derivative_consistency": ("max", 1e-6),
    "coercivity": ("max", 1e-12),
    "functional_identity": ("max", 1e-12),
    "hardy_smallness": ("min", 0.05),
    "off_peak_monotone_in_R": ("max", 0.0),
}


@dataclass(frozen=True)
class BatteryConfig:
    seed: int = 0
    n: int = 48  # limiting grids
    samples: int = 1000  # pointwise nonlinearity checks
    fields: int = 20
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise DomainError(f"unknown invariants in tolerance overrides: {sorted(unknown)}")

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name][1]))


def _random_field(grid: Grid2D, rng) -> ComplexField:
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def _small_instance() -> ProblemInstance:
    return ProblemInstance(
        Rect(-1.0, 1.0, -1.0, 1.0), (Rect(-0.5, 0.5, -0.5, 0.5),),
        ConstantV(1.0), QuadraticRadialFieldA(0.3, 1.0, (0.0, 0.0)),
    )


# -- individual invariants ---------------------------------------------------------


def _operator_checks(rng, cfg):
    grid = Grid2D.square(3.0, 24)
    A = VectorPotentialField.from_function(grid, lambda x, y: (np.sin(y) - 0.4 * y, 0.7 * x + 0.1 * x * y))
    V = RealField(grid, 1 + 0.1 * grid.mesh()[0] ** 2)
    K = magnetic_operator(A, V, 0.7)
    herm = abs(K - K.conj().T).max() / abs(K).max()
    err = 0.0
    for _ in range(cfg.fields):
        u = _random_field(grid, rng)
        direct = magnetic_energy(u, A, V, 0.7)
        via = grid.cell_area * float(np.real(np.vdot(u.flat, K @ u.flat)))
        err = max(err, abs(direct - via) / direct)
    return {"operator_energy_consistency": err, "operator_hermitian": float(herm)}


def _diamagnetic(rng, cfg):
    grid = Grid2D.square(2.0, 24)
    worst = -math.inf
    for _ in range(cfg.fields):
        b = rng.uniform(-3, 3)
        A = symmetric_gauge_potential(b, grid)
        u = _random_field(grid, rng)
        kin = kinetic_energy(u, A)
        worst = max(worst, (modulus_gradient_energy(u) - kin) / kin)
    return {"diamagnetic_inequality": worst}


def _nehari(rng, cfg):
    spec = LimitingSpec(1.0, 0.5)
    grid = default_grid(spec, 32)
    A = symmetric_gauge_potential(0.5, grid)
    worst = 0.0
    for _ in range(cfg.fields):
        v = _random_field(grid, rng)
        worst = max(worst, abs(nehari_defect(v.scaled(nehari_scale(v, spec, A)), spec, A)))
    return {"nehari_identity": worst}


def _limiting(cfg):
    sc = SolverConfig(n=cfg.n, restarts=2)

    def energy(v, b, potential=None, grid=None):
        spec = LimitingSpec(v, b)
        return minimize_quotient(spec, grid, sc, cfg.seed, potential).energy

    out = {}
    g = default_grid(LimitingSpec(1.0, 0.5), cfg.n)
    e_sym = energy(1.0, 0.5, symmetric_gauge_potential(0.5, g), g)
    e_lan = energy(1.0, 0.5, landau_gauge_potential(0.5, g), g)
    out["gauge_invariance"] = abs(e_sym - e_lan) / e_sym
    out["scaling_law"] = abs(energy(4.0, 2.0) / (4 * energy(1.0, 0.5)) - 1)
    table = build_reduced_table(4.0, [0.0, 0.25, 0.5, 0.75, 1.0], sc, cfg.seed, max_jump=None)
    e0 = table.e[0]
    out["diamagnetic_strictness"] = float(min(e - e0 for e in table.e[[1, 2, 4]]) / e0)
    out["continuity_of_E"] = float(table.relative_jumps().max())
    out["monotonicity_in_V"] = min((energy(1.25, b) - table(b)) / table(b) for b in (0.0, 0.5))
    return out


def _nonlinearity(rng, cfg):
    inst = _small_instance()
    spec = PenalizedSpec(inst, 0.1)
    p = inst.p
    x = rng.uniform(-1, 1, size=(cfg.samples, 2))
    mod = 10 ** rng.uniform(-3, 1, size=cfg.samples)
    s = mod * np.exp(1j * rng.uniform(0, 2 * np.pi, size=cfg.samples))
    from .penalized import _cap

    inside, weight = _cap(x[:, 0], x[:, 1], spec)
    g = g_core(s, inside, weight, p)
    G = G_core(s, inside, weight, p)
    pair = np.real(np.conj(s) * g)
    scale = mod**p
    viol = [
        np.max((np.abs(g) - mod ** (p - 1)) / mod ** (p - 1)),  # growth |g| <= |s|^(p-1)
        np.max(np.where(inside, -np.inf, (np.abs(g) - weight * mod) / np.maximum(weight * mod, 1e-300))),  # cap outside the set
        np.max((2 * G - pair) / scale),  # 2G <= <s, g>
        np.max(np.where(inside, (p * G - pair) / scale, -np.inf)),  # pG <= <s, g> inside
        np.max(np.where(G > 0, -np.inf, 1.0)),  # G > 0
    ]
    tiny = 1e-6 * np.exp(1j * rng.uniform(0, 2 * np.pi, size=cfg.samples))
    ratio0 = float(np.max(np.abs(g_core(tiny, inside, weight, p)) / 1e-6))
    viol.append(ratio0 - 1e-10)  # superlinear at 0: ratio below 1e-10 at |s| = 1e-6
    # d/dr G(x, r s/|s|) against <s/|s|, g>
    d = 1e-6 * np.maximum(mod, 1e-2)
    unit = s / mod
    fd = (G_core((mod + d) * unit, inside, weight, p) - G_core((mod - d) * unit, inside, weight, p)) / (2 * d)
    radial = np.real(np.conj(unit) * g)
    cons = float(np.max(np.abs(fd - radial) / np.maximum(np.abs(radial), 1e-12)))
    return {"g_properties": float(max(viol)), "G_derivative_consistency": cons}


def _penalized(rng, cfg):
    inst = _small_instance()
    spec = PenalizedSpec(inst, 0.1)
    problem = PenalizedProblem(spec, domain_grid(inst, 0.1, 4))
    X, Y = problem.grid.mesh()
    mask = inst.in_lambda(X, Y)
    p, mu = inst.p, spec.mu_pen
    coer, ident = -math.inf, 0.0
    for _ in range(cfg.fields):
        u = _random_field(problem.grid, rng).scaled(rng.uniform(0.1, 3.0))
        q = problem.quadratic(u)
        rhs = problem.functional(u) - problem.nehari_pairing(u) / p
        lhs = (0.5 - 1 / p) * (1 - mu) * q
        coer = max(coer, (lhs - rhs) / q)
        w = ComplexField(problem.grid, np.where(mask, u.values, 0))
        f_orig = problem.original_functional(w)
        ident = max(ident, abs(problem.functional(w) - f_orig) / max(abs(f_orig), 1e-300))
    eps_bar = hardy_epsilon_bar(spec, [0.05, 0.1, 0.2, 0.4, 0.8], n_fields=5, seed=cfg.seed)
    # off-peak sup along increasing radii
    u = _random_field(problem.grid, rng)
    sups = [off_peak_sup(u, (0.0, 0.0), R, 0.1) for R in (0, 1, 2, 4, 8, 16)]
    mono = float(max(b - a for a, b in zip(sups, sups[1:])))
    return {"coercivity": coer, "functional_identity": ident, "hardy_smallness": eps_bar,
            "off_peak_monotone_in_R": mono}


def invariant_battery(config: BatteryConfig | None = None) -> dict:
    """Run every invariant with seeded inputs; failures are report entries."""
    cfg = config or BatteryConfig()
    rng = np.random.default_rng(cfg.seed)
    measured = {}
    for check in (_operator_checks, _diamagnetic, _nehari, _nonlinearity, _penalized):
        measured.update(check(rng, cfg))
    measured.update(_limiting(cfg))
    entries = []
    for name, (sense, _) in DEFAULT_TOLERANCES.items():
        value = float(measured[name])
        tol = cfg.tolerance(name)
        passed = value <= tol if sense == "max" else value >= tol
        entries.append({"name": name, "sense": sense, "measured": value, "tolerance": tol,
                        "margin": (tol - value) if sense == "max" else (value - tol), "passed": bool(passed)})
    return {
        "config": {"seed": cfg.seed, "n": cfg.n, "samples": cfg.samples, "fields": cfg.fields,
                   "tolerances": dict(sorted(cfg.tolerances.items()))},
        "invariants": entries,
        "failed": [e["name"] for e in entries if not e["passed"]],
        "all_passed": all(e["passed"] for e in entries),
    }


def battery_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
