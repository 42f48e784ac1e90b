from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scl_regularity.exact import (ExactSolution, UndefinedSpeedError, ValidityWindowError, build_schedule,
                                  evaluate, evolve, first_interaction_bruteforce, interaction_times,
                                  kruzkov_secant_check, pair_crossing_times, rankine_hugoniot_speed)
from scl_regularity.flux import FluxSpec, effective_flux
from scl_regularity.profile import PlanarProfile
from scl_regularity.staircase import BlowupParams, build_riemann, build_single_box

# mpmath oracles, frozen
PROP2_GPRIME_EVEN = 0.27874582145796206997  # R=1.5, n=7, gamma=1/3+1/30: 8/(R^3 n^(3 gamma))
PROP2_RH = 0.13066210380841972030  # 15/(4 R^3 n^(3 gamma))


def test_rh_burgers():
    assert rankine_hugoniot_speed(lambda u: np.array([u * u / 2]), 1.0, 0.0)[0] == 0.5


def test_rh_power_law_component():
    v = rankine_hugoniot_speed(FluxSpec.power_law(1, 2), 2.0, 1.0)
    assert v[1] == pytest.approx(7.0 / 3.0, rel=1e-15)
    assert v[0] == pytest.approx(15.0 / 4.0, rel=1e-15)


def test_rh_undefined():
    with pytest.raises(UndefinedSpeedError):
        rankine_hugoniot_speed(FluxSpec.power_law(1, 2), 1.0, 1.0)


def test_prop2_speed_oracle():
    p = BlowupParams(construction="prop2", R=1.5)
    eff = effective_flux(p.flux(), p.direction)
    n = 7.0
    a, b = 2 / (1.5 * n**p.alpha), 1 / (1.5 * n**p.alpha)
    assert eff.dg(a) == pytest.approx(PROP2_GPRIME_EVEN, rel=1e-13)
    xi = np.array(p.direction)
    assert float(xi @ rankine_hugoniot_speed(p.flux(), a, b)) == pytest.approx(PROP2_RH, rel=1e-13)


def test_interaction_times_oracle():
    assert interaction_times(BlowupParams()) == pytest.approx((4 / 17, 4 / 11), rel=1e-15)
    t_n, t_t = interaction_times(BlowupParams(R=2.0, N=65))
    assert t_n == pytest.approx(32 / 17, rel=1e-15) and t_t == pytest.approx(32 / 11, rel=1e-15)


def test_interaction_times_rejects_polynomial():
    with pytest.raises(ValueError):
        interaction_times(BlowupParams(), FluxSpec.polynomial([[0, 0, 1], [0, 1]]))


def test_bruteforce_riemann_is_infinite():
    # two-state data a > b on the whole line: a single shock, nothing to cross
    flux = effective_flux(FluxSpec.power_law(1, 2), (1.0, 0.0))
    prof = PlanarProfile.from_constants([-np.inf, 0.0, np.inf], [0.9, 0.3], direction=(1.0, 0.0), dimension=2,
                                        background=0.3)
    with np.errstate(all="raise"):
        assert first_interaction_bruteforce(prof, flux) == np.inf


def test_bruteforce_fan_meets_shock():
    flux = effective_flux(FluxSpec.power_law(1, 2), (1.0, 0.0))
    # fan 0 -> 1 at m=0 and shock 1 -> 0 at m=2: the fan head (speed 1) meets the shock (speed 1/4) at t=8/3
    prof = PlanarProfile.from_constants([0.0, 2.0], [1.0], direction=(1.0, 0.0), dimension=2)
    assert first_interaction_bruteforce(prof, flux) == pytest.approx(8.0 / 3.0, rel=1e-15)


def test_bruteforce_matches_closed_form(prop1_solution):
    assert prop1_solution.schedule.t_bruteforce == pytest.approx(4 / 17, rel=1e-12)


def test_prop2_t0_positive(prop2_solution):
    sched = prop2_solution.schedule
    assert sched.t0 > 0
    assert sched.t_bruteforce == pytest.approx(min(sched.t_n, sched.t_tilde), rel=1e-12)


def test_pair_crossing_times_n_independent_char():
    p = BlowupParams(n_max=200)
    eff = effective_flux(p.flux(), p.direction)
    t_char, t_shock = pair_crossing_times(p, eff, np.arange(3, 200))
    np.testing.assert_allclose(t_char, 4 / 17, rtol=1e-12)
    # the plateau sigma_{2n+1} has width l_{2n+2}, so the shock crossing carries ((n)/(n+1))^q
    n = np.arange(3, 200)
    np.testing.assert_allclose(t_shock, 4 / 11 * (n / (n + 1.0)) ** p.q, rtol=1e-12)


def test_lax_admissible(prop1_solution, prop2_solution):
    assert prop1_solution.schedule.lax_admissible(prop1_solution.flux)
    assert prop2_solution.schedule.lax_admissible(prop2_solution.flux)
    fans = prop1_solution.schedule.fans
    assert np.all(prop1_solution.schedule.speed_lo[fans] < prop1_solution.schedule.speed_hi[fans])


@pytest.mark.parametrize("a,b", [(1.0, 0.0), (2.0, 0.5), (0.7, 0.1)])
def test_kruzkov_secant(a, b):
    eff = effective_flux(FluxSpec.power_law(1, 2), (1.0, 0.0))
    assert kruzkov_secant_check(eff, a, b)


def test_evolve_identity_at_zero(prop1_solution):
    prof = prop1_solution.at(0.0)
    np.testing.assert_array_equal(prof.edges, prop1_solution.profile.edges)


def test_evolve_left_edge(prop1_params, prop1_solution):
    t = 0.1
    prof = prop1_solution.at(t)
    N = prop1_params.start
    a = prop1_params.alpha
    w = prop1_solution.profile.edges[0]
    # the first wave is the fan 0 -> sigma_{2N}; its head moves at g'(sigma_{2N}) = 8/N^(3 alpha')
    assert prof.edges[1] == pytest.approx(w + 8.0 / N ** (3 * a) * t, rel=1e-14)


def test_evolve_plateau_value(prop1_params, prop1_solution):
    t = 0.1
    prof = prop1_solution.at(t)
    n = 10
    k = np.flatnonzero(prof.rung == 2 * n + 1)[0]
    mid = 0.5 * (prof.edges[k] + prof.edges[k + 1])
    assert prof(mid) == 1.0 / n**prop1_params.alpha
    x = np.array([mid, 0.0])
    assert evaluate(prop1_solution, x, t) == 1.0 / n**prop1_params.alpha


def test_fan_interior_inverse():
    eff = effective_flux(FluxSpec.power_law(1, 2), (1.0, 0.0))
    sigma = 0.8
    assert eff.inv_dg(eff.dg(sigma)) == pytest.approx(sigma, rel=1e-15)
    eta = np.linspace(0.01, 2.0, 50)
    np.testing.assert_allclose(eff.inv_dg(eta), eta ** (1 / 3), rtol=1e-14)


def test_validity_window(prop1_solution):
    with pytest.raises(ValidityWindowError):
        prop1_solution.at(prop1_solution.t0)
    with pytest.raises(ValueError):
        prop1_solution.at(-0.1)


def test_ordering_100_times(prop1_solution):
    for t in np.linspace(0, prop1_solution.t0, 102)[1:-1]:
        prof = evolve(prop1_solution.profile, prop1_solution.flux, float(t), prop1_solution.schedule)
        assert np.all(np.diff(prof.edges) >= 0)


def test_mass_conservation(prop1_solution):
    lo = prop1_solution.profile.edges[0] - 1.0
    hi = prop1_solution.profile.edges[-1] + 1.0
    m0 = prop1_solution.at(0.0).antiderivative(hi, lo)
    for t in np.linspace(0, prop1_solution.t0, 12)[1:-1]:
        mt = prop1_solution.at(float(t)).antiderivative(hi, lo)
        assert abs(mt - m0) <= 1e-10 * abs(m0)


def test_evaluate_outside_support(prop1_solution):
    assert evaluate(prop1_solution, np.array([1e6, 0.0]), 0.1) == 0.0


def test_evaluate_shell_is_nan(prop1_solution):
    sol = prop1_solution
    L = sol.profile.box_half_width
    t = 0.5 * sol.t0
    reach = sol.schedule.max_speed * t
    assert np.isnan(evaluate(sol, np.array([0.0, L + 0.5 * reach]), t))


def test_riemann_two_state_rarefaction():
    spec = FluxSpec.prop2_pair()
    prof = build_riemann(0.2, 0.6, (1.0, -1.0), box_half_width=4.0)
    sol = ExactSolution.from_profile(prof, spec)
    t = 0.5
    fa, fb = spec.df(0.2), spec.df(0.6)
    xi = np.array([1.0, -1.0])
    # M(x - f'(a) t) < 0 -> a ; M(x - f'(b) t) > 0 -> b
    xa = fa * t + np.array([-0.05, 0.0])
    xb = fb * t + np.array([0.05, 0.0])
    assert xi @ (xa - fa * t) < 0 and xi @ (xb - fb * t) > 0
    assert evaluate(sol, xa, t) == 0.2
    assert evaluate(sol, xb, t) == 0.6


def test_riemann_schedule_shock_case():
    spec = FluxSpec.power_law(1, 2)
    prof = build_riemann(0.9, 0.3, (1.0, 0.0), box_half_width=2.0)
    sched = build_schedule(prof, spec)
    k = sched.shocks
    mid = [j for j in k if sched.left[j] == 0.9]
    assert len(mid) == 1
    np.testing.assert_allclose(sched.rh_vectors[mid[0]],
                               (spec.f(0.9) - spec.f(0.3)) / 0.6, rtol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95))
def test_fans_join_neighbours_continuously(frac):
    p = BlowupParams(n_max=10)
    sol = ExactSolution.from_profile(build_single_box(p), p.flux(), p)
    ev = sol.at(frac * sol.t0)
    left, right = ev.limits()
    for k in np.flatnonzero(ev.kind == 1):
        prev = right[k - 1] if k > 0 else ev.background
        nxt = left[k + 1] if k + 1 < ev.n_pieces else ev.background
        assert left[k] == pytest.approx(prev, rel=1e-13, abs=1e-15)
        assert right[k] == pytest.approx(nxt, rel=1e-13, abs=1e-15)
