import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magnls.errors import DomainError, SupportOverflowError
from magnls.grid import ComplexField
from magnls.instance import ConstantFieldA, ConstantV, ProblemInstance, Rect, ZeroA, preset
from magnls.limiting import nehari_profile
from magnls.penalized import (
    G_core,
    _profile_interpolator,
    G_eps,
    PenalizedProblem,
    PenalizedSpec,
    demodulate,
    domain_grid,
    family_ray_sup,
    g_core,
    g_eps,
    hardy_epsilon_bar,
    hardy_weight,
    make_test_family,
    off_peak_sup,
    original_functional,
    penalization_H,
    penalized_functional,
    solve_penalized,
)

P = 4.0


def boxed(eps=0.2, **kw):
    inst = preset("quadratic-B", lambda_region=[[-1, 1, -1, 1]])
    return PenalizedSpec(inst, eps, **kw)


complexes = st.builds(lambda m, a: m * complex(math.cos(a), math.sin(a)),
                      st.floats(1e-4, 5), st.floats(0, 2 * math.pi))
weights = st.floats(0.0, 3.0)


# -- H ----------------------------------------------------------------------------


def test_H_vanishes_on_lambda():
    spec = boxed()
    assert penalization_H(0.3, -0.9, spec) == 0.0
    assert penalization_H(1.5, 0.0, spec) > 0


def test_H_literal_value_unit_radius():
    inst = ProblemInstance(Rect(-6, 6, -6, 6), (Rect(-2, 2, -2, 2),), ConstantV(1.0), ZeroA())
    spec = PenalizedSpec(inst, 0.1, (0.0, 0.0), 1.0, 1 / math.e, beta=1.0)
    assert penalization_H(math.e, 0.0, spec) == pytest.approx(1 / (32 * math.e**2), rel=1e-12)


def test_H_decays_faster_than_hardy_scale():
    inst = ProblemInstance(Rect(-500, 500, -500, 500), (Rect(-2, 2, -2, 2),), ConstantV(1.0), ZeroA())
    spec = PenalizedSpec(inst, 0.1)
    radii = np.array([3.0, 30.0, 300.0])
    ratio = penalization_H(radii, 0 * radii, spec) * radii**2 * np.log(radii / spec.rho0) ** 2
    assert np.all(np.diff(ratio) < 0)


def test_spec_defaults_and_validation():
    spec = boxed()
    assert spec.x0 == (0.0, 0.0) and spec.rho == 0.5 and spec.rho0 == 0.25
    with pytest.raises(DomainError):
        boxed(rho=1.0)
    with pytest.raises(DomainError):
        boxed(rho=0.4, rho0=0.4)
    with pytest.raises(DomainError):
        boxed(mu_pen=1.0)
    with pytest.raises(DomainError):
        boxed(eps=0.0)


# -- g and G ----------------------------------------------------------------------


def test_g_and_G_examples():
    assert g_core(0j, True, 0.0, P) == 0
    assert g_core(2.0, True, 0.0, P) == 8
    assert g_core(math.sqrt(0.5), False, 0.1, P) == pytest.approx(0.1 * math.sqrt(0.5))
    assert G_core(0.0, False, 0.3, P) == 0
    assert G_core(2.0, True, 0.0, P) == 4


@given(s=complexes, w=weights, inside=st.booleans())
def test_g_bounds(s, w, inside):
    g = g_core(s, inside, w, P)
    G = float(G_core(s, inside, w, P))
    pair = float(np.real(np.conj(s) * g))
    assert abs(g) <= abs(s) ** (P - 1) * (1 + 1e-12)  # growth
    if not inside:
        assert abs(g) <= w * abs(s) * (1 + 1e-12) + 1e-300  # cap
    assert 2 * G <= pair * (1 + 1e-12) + 1e-300  # 2G <= <s, g>
    if inside:
        assert P * G <= pair * (1 + 1e-12) + 1e-300  # pG <= <s, g> inside
    if s != 0 and (inside or w > 0):
        assert G > 0  # positivity


@given(w=st.floats(1e-3, 3.0), inside=st.booleans(), arg=st.floats(0, 2 * math.pi))
def test_g_superlinear_at_zero(w, inside, arg):
    s = 1e-6 * complex(math.cos(arg), math.sin(arg))
    assert abs(g_core(s, inside, w, P)) / abs(s) < 1e-10  # superlinear at 0


def test_G_is_primitive_of_g():
    rng = np.random.default_rng(7)
    spec = boxed()
    pts = rng.uniform(-2, 2, (100, 2))
    mods = rng.uniform(0.01, 2.0, 100)
    args = rng.uniform(0, 2 * math.pi, 100)
    h = 1e-6
    for (x, y), m, a in zip(pts, mods, args):
        e = complex(math.cos(a), math.sin(a))
        fd = (G_eps(x, y, (m + h) * e, spec) - G_eps(x, y, (m - h) * e, spec)) / (2 * h)
        exact = float(np.real(np.conj(e) * g_eps(x, y, m * e, spec)))
        assert fd == pytest.approx(exact, abs=1e-6)


def test_G_continuous_at_threshold():
    w = 0.3
    tbar = w ** (1 / (P - 2))
    lo = G_core(tbar * (1 - 1e-9), False, w, P)
    hi = G_core(tbar * (1 + 1e-9), False, w, P)
    assert hi == pytest.approx(lo, rel=1e-7)


# -- functionals --------------------------------------------------------------------


def test_functional_vanishes_at_zero():
    spec = boxed(eps=0.5)
    g = domain_grid(spec.instance, 0.5, 4)
    assert penalized_functional(ComplexField(g, np.zeros(g.shape)), spec) == 0.0


def test_functional_identity_on_lambda_supported_fields(rng):
    spec = boxed(eps=0.5)
    g = domain_grid(spec.instance, 0.5, 4)
    X, Y = g.mesh()
    mask = spec.instance.in_lambda(X, Y)
    for _ in range(5):
        u = ComplexField(g, mask * (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)))
        assert penalized_functional(u, spec) == original_functional(u, spec)


def test_coercivity(rng):
    spec = boxed(eps=0.5)
    prob = PenalizedProblem(spec, domain_grid(spec.instance, 0.5, 4))
    g = prob.grid
    for k in range(20):
        amp = 10.0 ** rng.uniform(-2, 1)
        u = ComplexField(g, amp * (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)))
        lhs = (0.5 - 1 / P) * (1 - spec.mu_pen) * prob.quadratic(u)
        rhs = prob.functional(u) - prob.nehari_pairing(u) / P
        assert lhs <= rhs * (1 + 1e-12)


def test_nehari_factor_closed_form_matches_bisection(rng):
    spec = boxed(eps=0.5)
    prob = PenalizedProblem(spec, domain_grid(spec.instance, 0.5, 4))
    X, Y = prob.grid.mesh()
    u = ComplexField(prob.grid, spec.instance.in_lambda(X, Y) * np.exp(-(X**2 + Y**2)))
    t = prob.nehari_factor(u.flat)
    assert abs(prob.nehari_pairing(u.scaled(t))) <= 1e-10 * prob.quadratic(u.scaled(t))


# -- test family --------------------------------------------------------------------


def test_family_without_potential_is_pure_rescaling(limiting_results):
    inst = ProblemInstance(Rect(-2, 2, -2, 2), (Rect(-2, 2, -2, 2),), ConstantV(1.0), ZeroA())
    v = nehari_profile(limiting_results(1.0, 0.0))
    u = make_test_family((0.0, 0.0), v, 0.1, inst)
    assert np.max(np.abs(np.imag(u.values))) <= 1e-12 * np.max(np.abs(u.values))


def test_family_modulus_is_profile_modulus(limiting_results):
    inst = preset("quadratic-B")
    v = nehari_profile(limiting_results(1.0, 0.1))
    eps, x_star = 0.1, (0.3, -0.2)
    u = make_test_family(x_star, v, eps, inst)
    X, Y = u.grid.mesh()
    cx, cy = v.grid.center
    pts = np.stack([cx + (X - x_star[0]) / eps, cy + (Y - x_star[1]) / eps], -1)
    ref = _profile_interpolator(v)(pts)
    assert np.max(np.abs(np.abs(u.values) - np.abs(ref))) <= 1e-12 * np.max(np.abs(ref))
    # and demodulating recovers the interpolated profile itself
    assert np.allclose(demodulate(u, x_star, eps, inst).values, ref, atol=1e-12)


def test_family_overflow_and_domain_errors(limiting_results):
    inst = preset("constant")
    v = nehari_profile(limiting_results(1.0, 0.5))
    with pytest.raises(SupportOverflowError):
        make_test_family((1.9, 0.0), v, 0.1, inst)
    boxed_inst = preset("constant", lambda_region=[[-1, 1, -1, 1]])
    with pytest.raises(DomainError):
        make_test_family((1.5, 0.0), v, 0.1, boxed_inst)


def test_family_level_in_landau_gauge(limiting_results):
    # constant field in Landau gauge: the phase correction must restore the symmetric-gauge profile
    inst = ProblemInstance(Rect(-2, 2, -2, 2), (Rect(-2, 2, -2, 2),), ConstantV(1.0),
                           ConstantFieldA(0.5, (0.0, 0.0), "landau"))
    res = limiting_results(1.0, 0.5)
    v = nehari_profile(res)
    level = family_ray_sup((0.3, -0.2), v, PenalizedSpec(inst, 0.05))
    assert level == pytest.approx(res.energy, rel=0.02)


def test_family_level_quadratic(limiting_results):
    inst = preset("quadratic-B")
    res = limiting_results(1.0, 0.1)
    level = family_ray_sup((0.0, 0.0), nehari_profile(res), PenalizedSpec(inst, 0.05))
    assert abs(level / res.energy - 1) <= 0.10


# -- solver -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def constant_spike(limiting_results):
    inst = preset("constant")
    spec = PenalizedSpec(inst, 0.1)
    prob = PenalizedProblem(spec)
    init = make_test_family((0.0, 0.0), nehari_profile(limiting_results(1.0, 0.5)), 0.1, inst, prob.grid)
    return spec, prob, solve_penalized(spec, init, problem=prob), limiting_results(1.0, 0.5).energy


def test_constant_spike_level(constant_spike):
    spec, prob, sol, e_half = constant_spike
    assert sol.converged and sol.residual <= 1e-5
    assert abs(sol.energy_scaled / e_half - 1) <= 0.10
    assert abs(prob.nehari_pairing(sol.u)) <= 1e-10 * prob.quadratic(sol.u)


def test_constant_spike_is_localized(constant_spike):
    spec, prob, sol, _ = constant_spike
    assert off_peak_sup(sol.u, sol.peak, 10, spec.eps) < 0.2 * sol.peak_height
    # nontrivial solutions stay above the trivial regime on the concentration set
    assert sol.peak_height ** (P - 2) >= (1 - spec.mu_pen) * 1.0


def test_off_peak_sup_monotone_and_empty(constant_spike):
    spec, _, sol, _ = constant_spike
    values = [off_peak_sup(sol.u, sol.peak, R, spec.eps) for R in (0, 1, 2, 5, 10, 20)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert off_peak_sup(sol.u, sol.peak, 100, spec.eps) == 0.0


def test_history_is_monotone(constant_spike):
    _, _, sol, _ = constant_spike
    assert np.all(np.diff(sol.history) <= 1e-12 * abs(sol.history[0]))


def test_penalized_solve_with_proper_lambda(limiting_results):
    inst = preset("quadratic-B", lambda_region=[[-1, 1, -1, 1]])
    spec = PenalizedSpec(inst, 0.1)
    prob = PenalizedProblem(spec)
    assert prob.has_outside
    init = make_test_family((0.0, 0.0), nehari_profile(limiting_results(1.0, 0.1)), 0.1, inst, prob.grid)
    sol = solve_penalized(spec, init, problem=prob)
    assert sol.converged
    assert np.hypot(*sol.peak) <= 2 * prob.grid.h[0]
    assert abs(prob.nehari_pairing(sol.u)) <= 1e-10 * prob.quadratic(sol.u)
    assert sol.peak_height ** (P - 2) >= (1 - spec.mu_pen) * 1.0


def test_solver_rejects_zero_and_foreign_grid():
    spec = PenalizedSpec(preset("constant"), 0.5)
    prob = PenalizedProblem(spec)
    with pytest.raises(DomainError):
        solve_penalized(spec, ComplexField(prob.grid, np.zeros(prob.grid.shape)), problem=prob)
    other = domain_grid(spec.instance, 0.5, 3)
    with pytest.raises(DomainError):
        solve_penalized(spec, ComplexField(other, np.ones(other.shape)), problem=prob)


def test_solver_reports_exhaustion(limiting_results):
    from magnls.penalized import PenalizedConfig

    inst = preset("constant")
    spec = PenalizedSpec(inst, 0.2)
    prob = PenalizedProblem(spec)
    X, Y = prob.grid.mesh()
    init = ComplexField(prob.grid, np.exp(-((X - 0.5) ** 2 + Y**2)))
    sol = solve_penalized(spec, init, PenalizedConfig(max_iter=1), prob)
    assert not sol.converged and "iteration limit" in sol.diagnostic
    assert json_ok(sol.record())


def json_ok(rec):
    import json

    return json.loads(json.dumps(rec, allow_nan=True))["iterations"] == rec["iterations"]


def test_hardy_smallness_threshold():
    spec = boxed(eps=0.1)
    bar = hardy_epsilon_bar(spec, [0.02, 0.05, 0.1, 0.2, 0.5, 1.0], n_fields=10, seed=0)
    assert bar >= 0.05
    assert hardy_epsilon_bar(spec, [0.02, 0.05, 0.1, 0.2, 0.5, 1.0], n_fields=10, seed=0) == bar
