"""Closed-form entropy solution of planar data up to the first wave interaction.

Every jump of a piecewise constant planar datum ``u0(m)`` solves its own
Riemann problem for ``u_t + g(u)_m = 0``: a Rankine-Hugoniot shock when the
state drops (``g`` convex), a centred rarefaction when it rises.  As long as
no two fronts cross, the solution is the superposition of these waves.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .flux import EffectiveFlux, FluxSpec, eval_flux, effective_flux
from .profile import CONST, FAN, PlanarProfile
from .staircase import BlowupParams, Tiling, closed_form_times

logger = logging.getLogger(__name__)

SHOCK, RAREFACTION, NONE = "shock", "fan", "none"


class ValidityWindowError(ValueError):
    """Query at or beyond the first interaction time."""


class UndefinedSpeedError(ValueError):
    pass


def rankine_hugoniot_speed(flux, a: float, b: float) -> np.ndarray:
    """``(f(a) - f(b)) / (a - b)`` evaluated without cancellation; ``flux`` is a FluxSpec, an EffectiveFlux or a callable."""
    if a == b:
        raise UndefinedSpeedError("Rankine-Hugoniot speed needs a != b")
    if isinstance(flux, FluxSpec):
        eval_flux(flux, np.array([a, b]))  # domain check
        return flux.chord(a, b)
    elif isinstance(flux, EffectiveFlux):
        return flux.chord(a, b)
    else:
        fa, fb = np.asarray(flux(a), float), np.asarray(flux(b), float)
    return (fa - fb) / (a - b)


def kruzkov_secant_check(flux: EffectiveFlux, a: float, b: float, samples: int = 1001) -> bool:
    """Oleinik chord condition for a shock from ``a`` down to ``b``.

    ``(g(k)-g(b))/(k-b) <= s <= (g(a)-g(k))/(a-k)`` for every ``k`` strictly
    between ``b`` and ``a``; with it every Kruzkov entropy inequality holds.
    """
    if not a > b:
        raise ValueError("an admissible shock for convex g needs a > b")
    s = float(rankine_hugoniot_speed(flux, a, b))
    k = np.linspace(b, a, samples + 2)[1:-1]
    lower = (flux.g(k) - flux.g(b)) / (k - b)
    upper = (flux.g(a) - flux.g(k)) / (a - k)
    tol = 1e-13 * max(1.0, abs(s))
    return bool(np.all(lower <= s + tol) and np.all(s <= upper + tol))


@dataclass
class WaveSchedule:
    """Waves emitted at every breakpoint of a constant initial profile.

    ``speed_lo``/``speed_hi`` are the speeds of the left and right front of
    each wave (equal for shocks).  ``rh_vectors`` holds the full velocity
    ``(f(a)-f(b))/(a-b)`` of every shock (NaN rows elsewhere).
    """

    position: np.ndarray
    kind: np.ndarray
    left: np.ndarray
    right: np.ndarray
    speed_lo: np.ndarray
    speed_hi: np.ndarray
    rh_vectors: np.ndarray
    t_bruteforce: float
    t1_prime: float
    max_speed: float
    t_n: float = np.nan
    t_tilde: float = np.nan
    meta: dict = field(default_factory=dict)

    @property
    def t0(self) -> float:
        return float(min(self.t_bruteforce, self.t1_prime))

    @property
    def shocks(self) -> np.ndarray:
        return np.flatnonzero(self.kind == SHOCK)

    @property
    def fans(self) -> np.ndarray:
        return np.flatnonzero(self.kind == RAREFACTION)

    def lax_admissible(self, flux: EffectiveFlux) -> bool:
        """``g'(right) < s < g'(left)`` at every shock."""
        k = self.shocks
        s = self.speed_lo[k]
        return bool(np.all(flux.dg(self.right[k]) < s) and np.all(s < flux.dg(self.left[k])))

    def front_lines(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(emission point, speed, wave index) of every front, shocks once and fans twice."""
        pos, vel, owner = [], [], []
        for j in np.flatnonzero(self.kind != NONE):
            pos.append(self.position[j])
            vel.append(self.speed_lo[j])
            owner.append(j)
            if self.kind[j] == RAREFACTION:
                pos.append(self.position[j])
                vel.append(self.speed_hi[j])
                owner.append(j)
        return np.array(pos, float), np.array(vel, float), np.array(owner, int)


def _interfaces(profile: PlanarProfile) -> tuple[np.ndarray, np.ndarray]:
    bg = profile.background
    left = np.concatenate([[bg], profile.value])
    right = np.concatenate([profile.value, [bg]])
    return left, right


def first_interaction_bruteforce(profile: PlanarProfile, flux: EffectiveFlux) -> float:
    """Earliest crossing of two fronts from different breakpoints (``inf`` if none)."""
    sched = _waves(profile, flux)
    return _first_crossing(*sched.front_lines())


def _first_crossing(pos: np.ndarray, vel: np.ndarray, owner: np.ndarray) -> float:
    # The first crossing of a family of lines always involves neighbours in
    # the initial order, so adjacent pairs suffice.
    if len(pos) < 2:
        return np.inf
    order = np.lexsort((vel, pos))
    pos, vel, owner = pos[order], vel[order], owner[order]
    dx = np.diff(pos)
    dv = vel[:-1] - vel[1:]
    ok = (owner[:-1] != owner[1:]) & (dv > 0)
    if not np.any(ok):
        return np.inf
    return float(np.min(dx[ok] / dv[ok]))


def _waves(profile: PlanarProfile, flux: EffectiveFlux) -> WaveSchedule:
    if profile.has_fans:
        raise ValueError("the wave schedule is built from an all-constant initial profile")
    a, b = _interfaces(profile)
    n = len(a)
    kind = np.where(a > b, SHOCK, np.where(a < b, RAREFACTION, NONE)).astype(object)
    # an interface at infinity never reaches anything
    kind[~np.isfinite(profile.edges)] = NONE
    lo = np.zeros(n)
    hi = np.zeros(n)
    d = len(profile.direction)
    rh = np.full((n, d), np.nan)
    fan = kind == RAREFACTION
    lo[fan] = flux.dg(a[fan])
    hi[fan] = flux.dg(b[fan])
    sh = np.flatnonzero(kind == SHOCK)
    if len(sh):
        lo[sh] = hi[sh] = flux.chord(a[sh], b[sh])
        rh[sh] = flux.spec.chord(a[sh], b[sh])
    sched = WaveSchedule(position=profile.edges.copy(), kind=kind, left=a, right=b, speed_lo=lo,
                         speed_hi=hi, rh_vectors=rh, t_bruteforce=np.inf, t1_prime=np.inf, max_speed=0.0)
    sched.t_bruteforce = _first_crossing(*sched.front_lines())
    return sched


def build_schedule(profile: PlanarProfile, spec: FluxSpec, params: BlowupParams | None = None,
                   flux: EffectiveFlux | None = None) -> WaveSchedule:
    """Waves, interaction times and validity window of ``profile``.

    ``t1_prime = (L - r) / V`` is the finite-speed time after which the box
    boundary can influence the inner box ``A_r``; ``V`` bounds every
    component of ``f'`` over the state range.
    """
    flux = effective_flux(spec, profile.direction) if flux is None else flux
    sched = _waves(profile, flux)
    lo, hi = profile.state_range()
    sched.max_speed = spec.max_speed(lo, hi)
    L, r = profile.box_half_width, profile.inner_half_width
    if np.isfinite(L) and sched.max_speed > 0:
        sched.t1_prime = (L - r) / sched.max_speed
    if params is not None:
        sched.t_n, sched.t_tilde = interaction_times(params)
    if not sched.t0 > 0:
        raise ValidityWindowError("empty validity window")
    return sched


def interaction_times(params: BlowupParams, flux: FluxSpec | None = None) -> tuple[float, float]:
    """Closed-form ``(t_n, t~_n)``; both are independent of ``n``.

    They hold for fluxes whose planar speed is ``g'(u) = u^k`` (power-law
    along ``e_1``, and the prop2 pair along ``(1, -1)``).
    """
    if flux is not None and flux.family == "polynomial":
        raise ValueError("closed forms need the power-law or prop2 family; use the brute-force time")
    k = params.k
    assert 2**k * (k - 1) + 1 > 0 and 2 ** (k + 1) - (k + 2) > 0
    return closed_form_times(k, params.R)


def pair_crossing_times(params: BlowupParams, flux: EffectiveFlux, n) -> tuple[np.ndarray, np.ndarray]:
    """Per-rung crossing times from the actual rung geometry.

    First entry: the fan edge leaving ``w_{2n}`` at ``g'(sigma_{2n})`` meets
    the shock emitted at ``w_{2n+1}``.  Second: that shock meets the slow
    edge of the fan at ``w_{2n+2}``.
    """
    n = np.asarray(n, dtype=float)
    R, a, q = params.R, params.alpha, params.q
    s_even = 2.0 / (R * n**a)
    s_odd = 1.0 / (R * n**a)
    rh = (flux.g(s_even) - flux.g(s_odd)) / (s_even - s_odd)
    t_char = n ** (-q) / (flux.dg(s_even) - rh)
    # plateau sigma_{2n+1} has width l_{2n+2} = (n+1)^-q
    t_shock = (n + 1) ** (-q) / (rh - flux.dg(s_odd))
    return t_char, t_shock


def evolve(profile: PlanarProfile, flux: EffectiveFlux, t: float,
           schedule: WaveSchedule | None = None) -> PlanarProfile:
    """Profile at time ``t`` for ``0 <= t < t0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    schedule = _waves(profile, flux) if schedule is None else schedule
    if t >= schedule.t0:
        raise ValidityWindowError(f"t={t} is outside the validity window [0, {schedule.t0})")
    if t == 0:
        return profile.with_header()
    n = profile.n_pieces
    lo = schedule.position + schedule.speed_lo * t
    hi = schedule.position + schedule.speed_hi * t
    # slots: wave 0, piece 0, wave 1, ..., piece n-1, wave n
    edges = np.empty(2 * n + 2)
    edges[0::2] = lo
    edges[1::2] = hi
    kind = np.full(2 * n + 1, CONST, np.int8)
    value = np.full(2 * n + 1, np.nan)
    center = np.full(2 * n + 1, np.nan)
    rung = np.full(2 * n + 1, -1, np.int64)
    kind[0::2] = np.where(schedule.kind == RAREFACTION, FAN, CONST)
    center[0::2] = schedule.position
    value[1::2] = profile.value
    rung[1::2] = profile.rung
    keep = np.ones(2 * n + 1, bool)
    keep[0::2] = schedule.kind == RAREFACTION
    # dropping wave slot 2k also drops its right edge (equal to its left one)
    drop_edges = np.flatnonzero(~keep) + 1
    edge_keep = np.ones(2 * n + 2, bool)
    edge_keep[drop_edges] = False
    edges = edges[edge_keep]
    if np.any(np.diff(edges) < 0):
        raise ValidityWindowError(f"fronts crossed before t={t}")
    return PlanarProfile(edges=edges, kind=kind[keep], value=value[keep], center=center[keep],
                         rung=rung[keep], time=float(t), flux=flux, background=profile.background,
                         direction=profile.direction, dimension=profile.dimension,
                         box_center=profile.box_center, box_half_width=profile.box_half_width,
                         inner_half_width=profile.inner_half_width, meta=dict(profile.meta))


@dataclass
class ExactSolution:
    """Entropy solution in ``R^d`` of one planar box datum, valid for ``t < t0``.

    Inside ``A_{L - V t}`` the solution is planar; outside ``A_{L + V t}`` it
    vanishes; in between it is not determined by the construction and
    :meth:`evaluate` returns NaN.
    """

    profile: PlanarProfile
    spec: FluxSpec
    flux: EffectiveFlux
    schedule: WaveSchedule
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_profile(cls, profile: PlanarProfile, spec: FluxSpec,
                     params: BlowupParams | None = None) -> "ExactSolution":
        flux = effective_flux(spec, profile.direction)
        return cls(profile, spec, flux, build_schedule(profile, spec, params, flux))

    @property
    def t0(self) -> float:
        return self.schedule.t0

    def at(self, t: float) -> PlanarProfile:
        if t not in self._cache:
            self._cache[t] = evolve(self.profile, self.flux, t, self.schedule)
        return self._cache[t]

    def evaluate(self, x, t: float) -> np.ndarray:
        return evaluate(self, x, t)


def evaluate(solution: ExactSolution, x, t: float) -> np.ndarray:
    """``u(x, t)`` for points ``x`` of shape ``(..., d)``."""
    prof = solution.at(t)
    x = np.asarray(x, dtype=float)
    d = prof.dimension
    if x.shape[-1] != d:
        raise ValueError(f"points must have {d} coordinates")
    y = x - np.asarray(prof.box_center)
    dist = np.max(np.abs(y), axis=-1)
    reach = solution.schedule.max_speed * t
    L = prof.box_half_width
    out = np.where(dist > L + reach, 0.0, np.nan)
    inner = dist <= L - reach
    if np.any(inner):
        m = y[inner] @ np.asarray(prof.direction)
        out[inner] = prof(m)
    return out


@dataclass
class TiledSolution:
    """Entropy solution of a tiling, box by box.

    The gaps between boxes exceed ``2 V t0^k``, so inside box ``k`` the
    solution equals that box's own solution for ``t < t0^k`` whatever
    happens in the boxes whose windows have already closed.
    """

    tiling: Tiling
    solutions: list[ExactSolution]

    @classmethod
    def from_tiling(cls, tiling: Tiling, spec: FluxSpec | None = None) -> "TiledSolution":
        sols = []
        for box, prof in zip(tiling.boxes, tiling.profiles()):
            sols.append(ExactSolution.from_profile(prof, spec or box.params.flux(), box.params))
        return cls(tiling, sols)

    def evaluate(self, x, t: float) -> np.ndarray:
        """``u(x, t)``; NaN where the owning box's window has closed or the value is undetermined."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for sol in self.solutions:
            prof = sol.profile
            dist = np.max(np.abs(x - np.asarray(prof.box_center)), axis=-1)
            near = dist <= prof.box_half_width + sol.schedule.max_speed * t
            if not np.any(near):
                continue
            out[near] = evaluate(sol, x[near], t) if t < sol.t0 else np.nan
        return out
