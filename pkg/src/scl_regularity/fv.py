"""First-order finite-volume oracles.

* :func:`godunov_solve` integrates the planar law ``u_t + g(u)_m = 0`` with
  the exact Godunov flux of a convex ``g``.
* :func:`lax_friedrichs_2d` integrates ``u_t + f_1(u)_x + f_2(u)_y = 0`` with
  local Lax-Friedrichs (Rusanov) interface fluxes, to test the planar
  reduction itself.

Both schemes are monotone under their CFL restriction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .flux import EffectiveFlux, FluxSpec, effective_flux
from .profile import PlanarProfile

logger = logging.getLogger(__name__)

BOUNDARIES = ("outflow", "periodic")


class CFLViolation(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    cells: int
    t_end: float
    cfl: float = 0.9

    def __post_init__(self):
        if not self.hi > self.lo or self.cells < 1:
            raise ValueError("empty grid")
        if not 0 < self.cfl < 1:
            raise ValueError("CFL number must lie in (0, 1)")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")

    @property
    def dm(self) -> float:
        return (self.hi - self.lo) / self.cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])


@dataclass(frozen=True)
class Grid2D:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int
    t_end: float
    cfl: float = 0.9

    def __post_init__(self):
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo) or min(self.nx, self.ny) < 1:
            raise ValueError("empty grid")
        if not 0 < self.cfl < 1:
            raise ValueError("CFL number must lie in (0, 1)")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.ny

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x_lo + (np.arange(self.nx) + 0.5) * self.dx
        y = self.y_lo + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class FVResult:
    averages: np.ndarray
    time: float
    steps: int
    dt: float
    initial_range: tuple[float, float]
    mass: list[float] = field(default_factory=list)

    def max_principle_violations(self) -> int:
        lo, hi = self.initial_range
        return int(np.count_nonzero((self.averages < lo) | (self.averages > hi)))


def godunov_flux(flux: EffectiveFlux, ul: np.ndarray, ur: np.ndarray) -> np.ndarray:
    """Exact Riemann flux of a convex ``g`` with minimiser ``u*``:
    ``max(g(max(ul, u*)), g(min(ur, u*)))``."""
    us = flux.minimizer
    return np.maximum(flux.g(np.maximum(ul, us)), flux.g(np.minimum(ur, us)))


def _pad(u: np.ndarray, bc: str, axis: int = 0) -> np.ndarray:
    mode = "wrap" if bc == "periodic" else "edge"
    width = [(0, 0)] * u.ndim
    width[axis] = (1, 1)
    return np.pad(u, width, mode=mode)


def godunov_solve(profile: PlanarProfile | np.ndarray, flux: EffectiveFlux, grid: Grid1D,
                  bc: str = "outflow", dt: float | None = None, track_mass: bool = False) -> FVResult:
    """Cell averages at ``grid.t_end``.

    ``profile`` is either a planar profile (initial averages are computed
    exactly) or an array of initial averages.
    """
    if bc not in BOUNDARIES:
        raise ValueError(f"unknown boundary condition {bc!r}")
    if isinstance(profile, PlanarProfile):
        u = profile.cell_averages(grid.edges)
    else:
        u = np.array(profile, dtype=float)
        if u.shape != (grid.cells,):
            raise ValueError("initial averages do not match the grid")
    lo, hi = float(u.min()), float(u.max())
    if not (flux.window[0] <= lo and hi <= flux.window[1]):
        raise ValueError("states leave the convexity window of g")
    # monotone scheme: states stay in [lo, hi]
    speed = float(np.max(np.abs(flux.dg(np.linspace(lo, hi, 257)))))
    dm = grid.dm
    dt_max = grid.cfl * dm / speed if speed > 0 else np.inf
    if dt is not None and dt > dt_max:
        raise CFLViolation(f"dt={dt} gives CFL {dt * speed / dm:.3f} > {grid.cfl}")
    step = dt_max if dt is None else dt
    if not np.isfinite(step):
        step = grid.t_end if grid.t_end > 0 else 1.0
    t, steps = 0.0, 0
    mass = [float(u.sum() * dm)] if track_mass else []
    while t < grid.t_end:
        k = min(step, grid.t_end - t)
        up = _pad(u, bc)
        F = godunov_flux(flux, up[:-1], up[1:])
        u = u - (k / dm) * (F[1:] - F[:-1])
        t = grid.t_end if k == grid.t_end - t else t + k
        steps += 1
        if track_mass:
            mass.append(float(u.sum() * dm))
    return FVResult(averages=u, time=t, steps=steps, dt=step, initial_range=(lo, hi), mass=mass)


def l1_error(numerical: np.ndarray, exact: np.ndarray, dm: float, mask: np.ndarray | None = None) -> float:
    diff = np.abs(numerical - exact)
    if mask is not None:
        diff = diff[mask]
    return float(diff.sum() * dm)


@dataclass
class ConvergenceRow:
    cells: int
    dm: float
    l1_error: float
    observed_order: float


def convergence_study(initial: PlanarProfile, exact_at_t: PlanarProfile, flux: EffectiveFlux,
                      lo: float, hi: float, t: float, cells=(1024, 2048, 4096),
                      window: tuple[float, float] | None = None, cfl: float = 0.9) -> list[ConvergenceRow]:
    """Godunov vs exact cell averages on successively refined grids.

    The L1 error is summed over cells lying inside ``window`` (default: the
    whole grid).
    """
    rows: list[ConvergenceRow] = []
    for n in cells:
        grid = Grid1D(lo, hi, n, t, cfl)
        res = godunov_solve(initial, flux, grid)
        exact = exact_at_t.cell_averages(grid.edges)
        mask = None
        if window is not None:
            e = grid.edges
            mask = (e[:-1] >= window[0]) & (e[1:] <= window[1])
        err = l1_error(res.averages, exact, grid.dm, mask)
        order = np.nan
        if rows:
            prev = rows[-1]
            order = float(np.log(prev.l1_error / err) / np.log(prev.dm / grid.dm))
        rows.append(ConvergenceRow(n, grid.dm, err, order))
    return rows


# ---------------------------------------------------------------------------
# two dimensions
# ---------------------------------------------------------------------------


def lax_friedrichs_2d(u0: np.ndarray, spec: FluxSpec, grid: Grid2D, bc: str = "periodic",
                      dt: float | None = None, track_mass: bool = False) -> FVResult:
    """Unsplit first-order scheme with Rusanov fluxes in each direction.

    ``u0`` holds cell averages with shape ``(nx, ny)``; the time step obeys
    ``dt (a_x/dx + a_y/dy) <= cfl``.
    """
    if spec.dimension != 2:
        raise ValueError("lax_friedrichs_2d needs a two-component flux")
    if bc not in BOUNDARIES:
        raise ValueError(f"unknown boundary condition {bc!r}")
    u = np.array(u0, dtype=float)
    if u.shape != (grid.nx, grid.ny):
        raise ValueError("initial field does not match the grid")
    lo, hi = float(u.min()), float(u.max())
    speeds = np.abs(spec.df(np.linspace(lo, hi, 257)))
    ax, ay = float(speeds[:, 0].max()), float(speeds[:, 1].max())
    rate = ax / grid.dx + ay / grid.dy
    dt_max = grid.cfl / rate if rate > 0 else np.inf
    if dt is not None and dt > dt_max:
        raise CFLViolation(f"dt={dt} gives CFL {dt * rate:.3f} > {grid.cfl}")
    step = dt_max if dt is None else dt
    if not np.isfinite(step):
        step = grid.t_end if grid.t_end > 0 else 1.0
    t, steps = 0.0, 0
    cell = grid.dx * grid.dy
    mass = [float(u.sum() * cell)] if track_mass else []
    while t < grid.t_end:
        k = min(step, grid.t_end - t)
        fx = _rusanov(spec, _pad(u, bc, 0), 0)
        fy = _rusanov(spec, _pad(u, bc, 1), 1)
        u = u - (k / grid.dx) * (fx[1:, :] - fx[:-1, :]) - (k / grid.dy) * (fy[:, 1:] - fy[:, :-1])
        t = grid.t_end if k == grid.t_end - t else t + k
        steps += 1
        if track_mass:
            mass.append(float(u.sum() * cell))
    return FVResult(averages=u, time=t, steps=steps, dt=step, initial_range=(lo, hi), mass=mass)


def _rusanov(spec: FluxSpec, up: np.ndarray, axis: int) -> np.ndarray:
    left = up[:-1, :] if axis == 0 else up[:, :-1]
    right = up[1:, :] if axis == 0 else up[:, 1:]
    fl = spec.f(left)[..., axis]
    fr = spec.f(right)[..., axis]
    a = np.maximum(np.abs(spec.df(left)[..., axis]), np.abs(spec.df(right)[..., axis]))
    return 0.5 * (fl + fr) - 0.5 * a * (right - left)


def second_antiderivative(profile: PlanarProfile, m, lo: float) -> np.ndarray:
    """``int_lo^m int_lo^s u`` for an all-constant profile (exact, piecewise quadratic)."""
    if profile.has_fans:
        raise ValueError("second antiderivative is implemented for constant pieces only")
    m = np.asarray(m, dtype=float)
    hi = float(max(np.max(m), lo))
    e = np.concatenate([[lo], np.clip(profile.edges, lo, hi), [hi]])
    v = np.concatenate([[profile.background], profile.value, [profile.background]])
    w = np.diff(e)
    A = np.concatenate([[0.0], np.cumsum(v * w)])  # first antiderivative at e
    B = np.concatenate([[0.0], np.cumsum(A[:-1] * w + 0.5 * v * w**2)])
    k = np.clip(np.searchsorted(e, m, side="right") - 1, 0, len(v) - 1)
    s = m - e[k]
    return B[k] + A[k] * s + 0.5 * v[k] * s**2


def planar_cell_averages_2d(profile: PlanarProfile, grid: Grid2D, period: float | None = None) -> np.ndarray:
    """Exact averages of ``phi(x - y)`` over square cells.

    Over a square of side ``h`` the coordinate ``m = x - y`` has a triangular
    density of half-width ``h``, so the average is a second difference of
    the second antiderivative.  With ``period`` the profile is repeated.
    """
    if tuple(profile.direction) != (1.0, -1.0):
        raise ValueError("expects the direction (1, -1)")
    if not np.isclose(grid.dx, grid.dy):
        raise ValueError("square cells required")
    h = grid.dx
    X, Y = grid.centers()
    mc = X - Y
    if period is not None:
        base = profile.edges[0]
        mc = base + np.mod(mc - base, period)
        tiled = _tile(profile, period, copies=3)
        lo = tiled.edges[0]
    else:
        tiled = profile
        finite = profile.edges[np.isfinite(profile.edges)]
        lo = float(min(finite.min(initial=np.inf), mc.min() - h)) - 1.0
    P = lambda z: second_antiderivative(tiled, z, lo)  # noqa: E731
    return (P(mc + h) - 2.0 * P(mc) + P(mc - h)) / h**2


def _tile(profile: PlanarProfile, period: float, copies: int) -> PlanarProfile:
    """Copies of a profile on ``[e0, e0 + period)`` shifted by ``-period .. +period``."""
    shifts = (np.arange(copies) - copies // 2) * period
    edges = np.concatenate([profile.edges[:-1] + s for s in shifts] + [[profile.edges[0] + shifts[-1] + period]])
    values = np.tile(profile.value, copies)
    return PlanarProfile.from_constants(edges, values, direction=profile.direction,
                                        dimension=profile.dimension)


def periodic_reference_1d(profile: PlanarProfile, flux: EffectiveFlux, t: float, cells: int = 16384,
                          cfl: float = 0.9) -> tuple[Grid1D, np.ndarray]:
    """Fine periodic Godunov solution of a profile spanning exactly one period."""
    grid = Grid1D(profile.edges[0], profile.edges[-1], cells, t, cfl)
    res = godunov_solve(profile, flux, grid, bc="periodic")
    return grid, res.averages


def triangle_average_periodic(grid: Grid1D, averages: np.ndarray, centers: np.ndarray, h: float) -> np.ndarray:
    """Average of a periodic piecewise-constant 1D field against the triangle kernel of half-width ``h``."""
    prof = PlanarProfile.from_constants(grid.edges, averages, direction=(1.0, -1.0), dimension=2)
    period = grid.hi - grid.lo
    tiled = _tile(prof, period, copies=3)
    mc = grid.lo + np.mod(centers - grid.lo, period)
    lo = tiled.edges[0]
    P = lambda z: second_antiderivative(tiled, z, lo)  # noqa: E731
    return (P(mc + h) - 2.0 * P(mc) + P(mc - h)) / h**2


@dataclass
class ReductionRow:
    cells: int
    l1_discrepancy: float
    mass_drift: float
    violations: int


def planar_reduction_study(profile: PlanarProfile, spec: FluxSpec, t: float, cells=(64, 128, 256),
                           ref_cells: int = 32768, cfl: float = 0.9) -> list[ReductionRow]:
    """2D Lax-Friedrichs on planar data ``phi(x - y)`` vs the 1D Godunov solution of ``g``.

    ``profile`` spans one period ``P`` in ``m = x - y`` and the square is
    ``[-P/2, P/2]^2`` with periodic boundaries, so the comparison window is
    the whole square.  The fine 1D solution is averaged over each square
    cell through the triangular density of ``m``.
    """
    period = float(profile.edges[-1] - profile.edges[0])
    flux = effective_flux(spec, profile.direction)
    g1, ref = periodic_reference_1d(profile, flux, t, ref_cells, cfl)
    rows = []
    for n in cells:
        grid = Grid2D(-period / 2, period / 2, -period / 2, period / 2, n, n, t, cfl)
        u0 = planar_cell_averages_2d(profile, grid, period=period)
        res = lax_friedrichs_2d(u0, spec, grid, track_mass=True)
        X, Y = grid.centers()
        exact = triangle_average_periodic(g1, ref, X - Y, grid.dx)
        err = float(np.abs(res.averages - exact).sum() * grid.dx * grid.dy)
        drift = float(np.max(np.abs(np.asarray(res.mass) - res.mass[0])))
        rows.append(ReductionRow(n, err, drift, res.max_principle_violations()))
    return rows
