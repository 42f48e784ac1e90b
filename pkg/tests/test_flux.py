from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scl_regularity.flux import (ConvexityError, FluxDomainError, FluxSpec, effective_flux, eval_flux,
                                 eval_flux_prime, nondegeneracy_exponent, sphere_lattice)


def test_power_law_derivative_at_zero():
    assert np.array_equal(eval_flux_prime(FluxSpec.power_law(1, 2), 0.0), [0.0, 0.0])


def test_power_law_derivative_at_two():
    np.testing.assert_array_equal(eval_flux_prime(FluxSpec.power_law(1, 2), 2.0), [8.0, 4.0])


def test_prop2_derivative_at_one():
    np.testing.assert_array_equal(eval_flux_prime(FluxSpec.prop2_pair(), 1.0), [2.0, 1.0])


def test_domain_error():
    with pytest.raises(FluxDomainError):
        eval_flux(FluxSpec.power_law(1, 2, u_bound=3.0), 3.5)


@pytest.mark.parametrize("zeta,d", [(1, 1), (1, 2), (2, 3), (3, 2)])
def test_power_law_exponents(zeta, d):
    spec = FluxSpec.power_law(zeta, d, u_bound=2.0)
    u = np.linspace(0, 2, 11)
    expected = np.stack([u ** (zeta + d + 1 - k) for k in range(1, d + 1)], axis=-1)
    np.testing.assert_allclose(spec.df(u), expected, rtol=1e-15)


@pytest.mark.parametrize("spec", [FluxSpec.power_law(1, 2), FluxSpec.prop2_pair(),
                                  FluxSpec.polynomial([[0, 1, 0, 2], [1, -1, 0.5]])])
def test_derivative_matches_finite_differences(spec):
    # central differences at 1e3 points; relative error 1e-6
    u = np.linspace(-0.99 * spec.u_bound, 0.99 * spec.u_bound, 1000)
    h = 1e-5
    fd = (spec.f(u + h) - spec.f(u - h)) / (2 * h)
    exact = spec.df(u)
    scale = np.maximum(np.abs(exact), 1.0)
    assert np.max(np.abs(fd - exact) / scale) < 1e-6


def test_prop2_effective_flux_exact():
    eff = effective_flux(FluxSpec.prop2_pair(), (1.0, -1.0))
    u = np.linspace(-3, 3, 101)
    np.testing.assert_allclose(eff.g(u), (u**4 + 1) / 4, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(eff.dg(u), u**3, rtol=1e-14, atol=1e-13)
    assert eff.dg(2.0) == 8.0


def test_power_law_effective_flux_along_e1():
    eff = effective_flux(FluxSpec.power_law(1, 2), (1.0, 0.0))
    u = np.linspace(0, 3, 31)
    np.testing.assert_allclose(eff.dg(u), u**3, rtol=1e-15)


def test_effective_flux_zero_direction():
    with pytest.raises(ValueError):
        effective_flux(FluxSpec.power_law(1, 2), (0.0, 0.0))


def test_no_convexity_window():
    with pytest.raises(ConvexityError):
        effective_flux(FluxSpec.polynomial([[0, 1], [0, 1]]), (1.0, -1.0))


def test_convexity_window_is_increasing():
    eff = effective_flux(FluxSpec.polynomial([[0, 0, 0, -1], [0, 0, 1]]), (1.0, 1.0), base_point=-0.1)
    lo, hi = eff.window
    assert lo < -0.1 < hi
    u = np.linspace(lo, hi, 1000)
    assert np.all(np.diff(eff.dg(u)) > 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-26.9, max_value=26.9))
def test_inverse_speed_roundtrip_closed_form(eta):
    eff = effective_flux(FluxSpec.prop2_pair(), (1.0, -1.0))
    u = eff.inv_dg(eta)
    assert abs(eff.dg(u) - eta) <= 1e-12 * max(1.0, abs(eta))


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.0, max_value=2.0))
def test_inverse_speed_bisection(u):
    # (u^3/3 + u) along (1, 0): no closed form, so bisection is used
    eff = effective_flux(FluxSpec.polynomial([[0, 0, 0.5, 0, 0], [0, 0, 0, 0.25, 0.0625]]), (1.0, 0.0))
    assert eff.monomial is None
    assert abs(eff.inv_dg(eff.dg(u)) - u) < 1e-13


def test_fan_integral_closed_form():
    eff = effective_flux(FluxSpec.power_law(1, 2), (1.0, 0.0))
    # int_0^8 eta^(1/3) = 12
    assert eff.fan_integral(0.0, 8.0) == pytest.approx(12.0, rel=1e-14)


def test_sphere_lattice_unit_norm():
    for dim in (2, 3, 4):
        pts = sphere_lattice(500, dim)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, rtol=1e-12)


def test_nondegeneracy_measures_monotone_and_bounded():
    spec = FluxSpec.power_law(1, 2, u_bound=3.0)
    res = nondegeneracy_exponent(spec, 3.0, np.logspace(-6, -1, 21), sphere_samples=200, v_grid=100_000,
                                 refine_top=1, check_refinement=False)
    assert np.all(res.measures >= 0) and np.all(res.measures <= 6.0)
    assert np.all(np.diff(res.measures) >= 0)
    assert 0 < res.alpha <= 1


def test_linear_flux_is_degenerate():
    spec = FluxSpec.polynomial([[0, 1], [0, 1]], u_bound=1.0)
    d = np.array([0.0, 1.0, -1.0]) / np.sqrt(2)
    res = nondegeneracy_exponent(spec, 1.0, np.logspace(-6, -1, 21), sphere_samples=200, v_grid=100_000,
                                 extra_directions=[d], check_refinement=False)
    assert res.degenerate
    assert np.isnan(res.alpha)


def test_chord_avoids_cancellation():
    # g = (u^4 + 1)/4 along (1, -1): chord (a+b)(a^2+b^2)/4 = 4.6875e-10 for a=1e-3, b=5e-4
    eff = effective_flux(FluxSpec.prop2_pair(), (1.0, -1.0))
    assert eff.chord(1e-3, 5e-4) == pytest.approx(4.6875e-10, rel=1e-14)
    assert FluxSpec.prop2_pair().chord(1e-3, 5e-4) @ [1.0, -1.0] == pytest.approx(4.6875e-10, rel=1e-5)
    # power-law: (|a|^3/3 - |b|^3/3)/(a-b) for negative states
    spec = FluxSpec.power_law(1, 1)
    assert spec.chord(-0.5, -0.2)[0] == pytest.approx(-(0.25 + 0.1 + 0.04) / 3, rel=1e-15)
