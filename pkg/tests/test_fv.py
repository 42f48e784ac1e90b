from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scl_regularity.flux import FluxSpec, effective_flux
from scl_regularity.fv import (CFLViolation, Grid1D, Grid2D, convergence_study, godunov_flux, godunov_solve,
                               lax_friedrichs_2d, planar_cell_averages_2d, planar_reduction_study)
from scl_regularity.profile import PlanarProfile
from scl_regularity.staircase import BlowupParams, build_riemann, build_single_box

BURGERS = effective_flux(FluxSpec.polynomial([[0, 0, 0.5]]), (1.0,))


def test_constant_preserved():
    grid = Grid1D(0, 1, 100, 0.3)
    res = godunov_solve(np.full(100, 0.7), BURGERS, grid, bc="periodic")
    np.testing.assert_allclose(res.averages, 0.7, rtol=0, atol=1e-15)


def test_burgers_shock_position():
    # a=1, b=0: shock at m = t/2
    errs = []
    for n in (200, 400, 800):
        grid = Grid1D(-1, 1, n, 0.5)
        prof = PlanarProfile.from_constants([-1.0, 0.0], [1.0])
        res = godunov_solve(prof, BURGERS, grid)
        exact = np.where(grid.centers < 0.25, 1.0, 0.0)
        exact[0] = 1.0
        errs.append((np.abs(res.averages - exact).sum() * grid.dm) / grid.dm)
    # L1 distance <= C dm with C independent of the grid
    assert max(errs) < 3.0


def test_godunov_flux_transonic():
    # convex flux with minimum at 0: rarefaction across the sonic point gives g(u*) = 0
    assert godunov_flux(BURGERS, np.array([-1.0]), np.array([1.0]))[0] == 0.0
    assert godunov_flux(BURGERS, np.array([1.0]), np.array([-1.0]))[0] == 0.5


def test_cfl_violation():
    grid = Grid1D(0, 1, 100, 0.1, cfl=0.5)
    with pytest.raises(CFLViolation):
        godunov_solve(np.full(100, 1.0), BURGERS, grid, dt=0.01)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=8, max_size=8))
def test_godunov_conservation_and_max_principle(vals):
    u0 = np.repeat(np.array(vals), 16)
    grid = Grid1D(0, 1, len(u0), 0.3)
    res = godunov_solve(u0, BURGERS, grid, bc="periodic", track_mass=True)
    assert res.max_principle_violations() == 0
    assert max(abs(m - res.mass[0]) for m in res.mass) <= 1e-12 * max(1.0, np.abs(u0).sum() * grid.dm)


def test_staircase_self_convergence(prop1_solution):
    # t = 0.1, refinement from 4096 cells: the L1 error roughly halves
    prof = prop1_solution.profile
    lo, hi = prof.edges[0] - 1.0, prof.edges[-2] + 1.0
    rows = convergence_study(prof, prop1_solution.at(0.1), prop1_solution.flux, lo, hi, 0.1,
                             cells=(4096, 8192))
    ratio = rows[1].l1_error / rows[0].l1_error
    assert 0.4 <= ratio <= 0.6


def test_staircase_max_principle(prop1_solution):
    prof = prop1_solution.profile
    grid = Grid1D(prof.edges[0] - 1.0, prof.edges[-1] + 1.0, 2048, 0.5 * prop1_solution.t0)
    res = godunov_solve(prof, prop1_solution.flux, grid)
    assert res.max_principle_violations() == 0


def test_lf_zero_stays_zero():
    grid = Grid2D(-1, 1, -1, 1, 32, 32, 0.2)
    res = lax_friedrichs_2d(np.zeros((32, 32)), FluxSpec.prop2_pair(), grid)
    assert np.all(res.averages == 0.0)


def test_lf_conservation():
    grid = Grid2D(-1, 1, -1, 1, 64, 64, 0.2)
    X, Y = grid.centers()
    u0 = 0.5 + 0.3 * np.sin(np.pi * X) * np.cos(np.pi * Y)
    res = lax_friedrichs_2d(u0, FluxSpec.prop2_pair(), grid, track_mass=True)
    assert max(abs(m - res.mass[0]) for m in res.mass) <= 1e-12
    assert res.max_principle_violations() == 0


def test_lf_cfl_violation():
    grid = Grid2D(-1, 1, -1, 1, 32, 32, 0.2)
    with pytest.raises(CFLViolation):
        lax_friedrichs_2d(np.ones((32, 32)), FluxSpec.prop2_pair(), grid, dt=1.0)


def test_planar_initial_averages_exact():
    prof = PlanarProfile.from_constants([-2.0, 0.0, 2.0], [0.2, 0.6], direction=(1.0, -1.0), dimension=2)
    grid = Grid2D(-1, 1, -1, 1, 8, 8, 0.1)
    u0 = planar_cell_averages_2d(prof, grid)
    X, Y = grid.centers()
    diag = np.isclose(X, Y)
    # the plane x = y cuts diagonal cells in half
    np.testing.assert_allclose(u0[diag], 0.4, rtol=1e-12)
    np.testing.assert_allclose(u0[X - Y < -grid.dx], 0.2, rtol=1e-12)


def test_riemann_two_plateaus():
    # a < b: plateaus a and b separated by a monotone transition between the planes
    # M(x - f'(a) t) = 0 and M(x - f'(b) t) = 0
    spec = FluxSpec.prop2_pair()
    a, b, T = 0.2, 0.6, 0.5
    grid = Grid2D(-1, 1, -1, 1, 256, 256, T)
    res = lax_friedrichs_2d(planar_cell_averages_2d(build_riemann(a, b, (1.0, -1.0)), grid), spec, grid,
                            bc="outflow")
    X, Y = grid.centers()
    M = X - Y
    u = res.averages
    # window shrunk by the maximal speed times T; plateaus read 0.2 away from the planes
    reach = spec.max_speed(a, b) * T + 0.05
    inner = (np.abs(X) <= 1 - reach) & (np.abs(Y) <= 1 - reach)
    ma, mb = spec.df(a) @ [1, -1] * T, spec.df(b) @ [1, -1] * T
    assert np.max(np.abs(u[inner & (M < ma - 0.2)] - a)) < 1e-2
    assert np.max(np.abs(u[inner & (M > mb + 0.2)] - b)) < 1e-2
    assert np.all(np.diff(np.diag(u[:, ::-1])) >= -1e-14)


def test_planar_reduction_small_grid():
    prof = PlanarProfile.from_constants([-1.0, -0.6, -0.2, 0.15, 0.5, 1.0], [0.2, 0.9, 0.4, 0.7, 0.1],
                                        direction=(1.0, -1.0), dimension=2)
    rows = planar_reduction_study(prof, FluxSpec.prop2_pair(), 0.4, cells=(32, 64), ref_cells=8192)
    assert rows[1].l1_discrepancy < rows[0].l1_discrepancy
    assert all(r.violations == 0 and r.mass_drift <= 1e-12 for r in rows)


def test_staircase_box_data_accepted():
    p = BlowupParams(n_max=5)
    prof = build_single_box(p)
    eff = effective_flux(p.flux(), p.direction)
    grid = Grid1D(prof.edges[0] - 1.0, prof.edges[-1] + 1.0, 256, 0.01)
    res = godunov_solve(prof, eff, grid, track_mass=True)
    assert abs(res.mass[-1] - res.mass[0]) <= 1e-12


def test_planar_averages_unbounded_profile():
    prof = PlanarProfile.from_constants([-np.inf, 0.0, np.inf], [0.2, 0.6], direction=(1.0, -1.0), dimension=2)
    grid = Grid2D(-1, 1, -1, 1, 16, 16, 0.1)
    u0 = planar_cell_averages_2d(prof, grid)
    assert np.all(np.isfinite(u0))
    assert u0.min() == pytest.approx(0.2) and u0.max() == pytest.approx(0.6)
