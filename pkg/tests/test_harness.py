import json
import math

import numpy as np
import pytest

from magnls.battery import DEFAULT_TOLERANCES, BatteryConfig, battery_json, invariant_battery
from magnls.concentration import build_reduced_table, table_grid
from magnls.errors import DomainError
from magnls.grid import ComplexField, Grid2D
from magnls.harness import (
    SweepConfig,
    SweepReport,
    decay_fit,
    epsilon_sweep,
    lorentz_balance,
    map_argmin,
    table_for,
)
from magnls.instance import ConstantFieldA, LinearV, ProblemInstance, QuadraticRadialFieldA, Rect, preset
from magnls.limiting import SolverConfig, nehari_profile
from magnls.penalized import PenalizedSpec, family_ray_sup

# -- decay ------------------------------------------------------------------------


def test_decay_fit_recovers_exponential_rate():
    eps = 0.002
    g = Grid2D.square(0.04, 161)
    X, Y = g.mesh()
    u = ComplexField(g, np.exp(-np.hypot(X, Y) / eps))
    lam, r2 = decay_fit(u, (0.0, 0.0), eps, (5 * eps, 15 * eps))
    assert lam == pytest.approx(1.0, rel=0.05)
    assert r2 > 0.99


def test_decay_fit_constant_field():
    g = Grid2D.square(1.0, 41)
    lam, r2 = decay_fit(ComplexField(g, np.full(g.shape, 0.3 + 0.4j)), (0.0, 0.0), 0.05, (0.25, 0.75))
    assert lam == pytest.approx(0.0, abs=1e-10)
    assert r2 == 1.0


def test_decay_fit_rejects_bad_annulus_and_sparse_data():
    g = Grid2D.square(1.0, 21)
    u = ComplexField(g, np.ones(g.shape))
    with pytest.raises(DomainError):
        decay_fit(u, (0.0, 0.0), 0.1, (0.5, 0.2))
    with pytest.raises(DomainError, match="usable nodes"):
        decay_fit(u, (0.0, 0.0), 0.1, (0.0, 0.1))
    # nodes with |u| <= 1e-14 are not usable
    with pytest.raises(DomainError):
        decay_fit(ComplexField(g, np.zeros(g.shape)), (0.0, 0.0), 0.1, (0.2, 0.9))


# -- sweep ------------------------------------------------------------------------


def test_report_requires_decreasing_eps():
    with pytest.raises(DomainError):
        SweepReport([0.1, 0.1], [], [], [], 1.0, [])
    with pytest.raises(DomainError):
        SweepReport([0.05, 0.1], [], [], [], 1.0, [])


def test_map_argmin_prefers_deepest_tie():
    cmap_point, cmap = map_argmin(preset("constant"), build_reduced_table(4.0, [0.0, 0.5], SolverConfig(n=48),
                                                                          max_jump=None), 9)
    assert cmap_point == (0.0, 0.0)
    assert cmap.argmin_point == (-2.0, -2.0)


def test_sweep_report_shape(quadratic_sweep):
    rep = quadratic_sweep
    n = len(rep.eps_values)
    for name in ("energies_scaled", "peaks", "off_peak_sups", "decay_rates", "decay_r2", "peak_heights",
                 "residuals", "iterations", "converged", "solutions"):
        assert len(getattr(rep, name)) == n
    assert rep.ok
    d = rep.to_dict()
    assert "solutions" not in d
    assert json.loads(json.dumps(d))["eps_values"] == [0.1, 0.07, 0.05]


def test_sweep_spikes_sit_at_the_map_argmin(quadratic_sweep):
    rep = quadratic_sweep
    assert rep.argmin_C == (0.0, 0.0)
    for eps, peak in zip(rep.eps_values, rep.peaks):
        assert math.dist(peak, rep.argmin_C) <= 4 * eps


def test_sweep_energies_bounded_below(quadratic_sweep):
    rep = quadratic_sweep
    assert all(e >= 0.9 * rep.target_inf_C for e in rep.energies_scaled)


def test_test_family_bounds_solved_level(quadratic_sweep, quadratic_instance, limiting_results):
    rep = quadratic_sweep
    v = nehari_profile(limiting_results(1.0, 0.1))
    for eps, sol in zip(rep.eps_values, rep.solutions):
        spec = PenalizedSpec(quadratic_instance, eps)
        level = family_ray_sup(rep.argmin_C, v, spec)
        assert level >= sol.energy_scaled * (1 - 0.05)


def test_sweep_is_reproducible(quadratic_instance, quadratic_table):
    a = epsilon_sweep(quadratic_instance, [0.25, 0.2], SweepConfig(), quadratic_table).to_dict()
    b = epsilon_sweep(quadratic_instance, [0.25, 0.2], SweepConfig(), quadratic_table).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_sweep_records_failures_and_continues(quadratic_instance, quadratic_table):
    # at eps = 1 the rescaled profile does not fit in the domain
    rep = epsilon_sweep(quadratic_instance, [1.0, 0.25], SweepConfig(), quadratic_table)
    assert not rep.ok
    assert rep.failures[0]["eps"] == 1.0 and "SupportOverflowError" in rep.failures[0]["error"]
    assert math.isnan(rep.energies_scaled[0]) and rep.solutions[0] is None
    assert rep.converged[1]


# -- force balance ------------------------------------------------------------------


@pytest.fixture(scope="module")
def unit_table():
    return build_reduced_table(4.0, table_grid(1.0), SolverConfig())


def test_balance_at_doubly_critical_point(unit_table):
    rep = lorentz_balance(preset("lorentz-critical"), (0.0, 0.0), unit_table)
    assert rep.force_residual < 0.05
    assert math.hypot(*rep.grad_C) < 1e-8


def test_force_parallel_to_gradient_of_C(unit_table):
    # a probe where V and B vary in different directions
    inst = ProblemInstance(Rect(-2, 2, -2, 2), (Rect(-2, 2, -2, 2),), LinearV(1.0, (0.2, 0.0), (0.0, 0.0)),
                           QuadraticRadialFieldA(0.3, 0.5, (0.5, -0.5)))
    rep = lorentz_balance(inst, (0.2, 0.4), unit_table)
    assert rep.cosine > 0.95
    # dE/dV = q/2 and dE/dB = mu/2 make grad C half the force
    half = np.array(rep.force) / 2
    assert np.linalg.norm(np.array(rep.grad_C) - half) <= 0.05 * np.linalg.norm(half)


def test_balance_on_quadratic_probe(quadratic_table):
    rep = lorentz_balance(preset("quadratic-B"), (0.5, 0.3), quadratic_table)
    assert rep.cosine > 0.95
    assert rep.mu > 0


def test_constant_field_leaves_only_electric_force(unit_table):
    inst = ProblemInstance(Rect(-2, 2, -2, 2), (Rect(-2, 2, -2, 2),), LinearV(1.0, (0.2, 0.0), (0.0, 0.0)),
                           ConstantFieldA(0.5, (0.0, 0.0), "symmetric"))
    rep = lorentz_balance(inst, (0.0, 0.0), unit_table)
    assert rep.grad_B == pytest.approx((0.0, 0.0), abs=1e-9)
    assert rep.force == pytest.approx((rep.q * 0.2, 0.0), rel=1e-9, abs=1e-9)
    assert rep.force_residual == pytest.approx(1.0)


def test_balance_stencil_must_fit(unit_table):
    with pytest.raises(DomainError):
        lorentz_balance(preset("lorentz-critical"), (2.0 - 1e-4, 0.0), unit_table)


def test_table_for_covers_scan(quadratic_instance, quadratic_table):
    assert quadratic_table.covers(0.0) and quadratic_table.covers(8.1)
    assert quadratic_table.relative_jumps().max() <= 0.05
    assert table_for is not None


# -- invariant battery ---------------------------------------------------------------


@pytest.fixture(scope="module")
def default_battery():
    return invariant_battery()


def test_battery_default_passes(default_battery):
    assert default_battery["all_passed"], default_battery["failed"]
    names = [e["name"] for e in default_battery["invariants"]]
    assert sorted(names) == sorted(DEFAULT_TOLERANCES)


def test_battery_reports_scaling_deviation(default_battery):
    entry = next(e for e in default_battery["invariants"] if e["name"] == "scaling_law")
    assert entry["measured"] <= 0.02


@pytest.mark.slow
def test_battery_pass_set_is_seed_independent():
    sets = []
    for seed in range(5):
        rep = invariant_battery(BatteryConfig(seed=seed))
        sets.append(frozenset(e["name"] for e in rep["invariants"] if e["passed"]))
    assert len(set(sets)) == 1


def test_battery_is_deterministic():
    assert battery_json(invariant_battery(BatteryConfig(seed=3))) == battery_json(invariant_battery(BatteryConfig(seed=3)))


def test_battery_tolerance_override():
    rep = invariant_battery(BatteryConfig(tolerances={"scaling_law": 0.0}))
    assert not rep["all_passed"]
    assert rep["failed"] == ["scaling_law"]
    with pytest.raises(DomainError):
        BatteryConfig(tolerances={"no_such_check": 1.0})
