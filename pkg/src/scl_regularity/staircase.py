"""Staircase initial data: rung sequences, single boxes and the multi-box tiling.

For rung index ``m >= 2N`` with ``n = m // 2``::

    l_m     = n^(-q)                 (q = k * alpha', k the fan exponent)
    sigma_m = 2 / (R n^alpha')       if m even
            = 1 / (R n^alpha')       if m odd
    w_m     = l_{2N} + ... + l_m

The data equal ``sigma_m`` on ``(w_m, w_{m+1})`` and a constant tail value
past the last rung, inside a box; they vanish elsewhere.  Two constructions
share this shape:

* ``prop1``: power-law flux, ``k = zeta + d``, ``alpha' = 1/k + eps``,
  tail ``R^-(d+4)``, planar direction ``e_1``;
* ``prop2``: the ``(u^2+1)^2/4, u^2/2`` pair, ``k = 3``, ``gamma = 1/3 + eps``,
  tail ``R^-6``, planar direction ``(1, -1)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from .flux import FluxSpec, effective_flux
from .profile import PlanarProfile

logger = logging.getLogger(__name__)

CONSTRUCTIONS = ("prop1", "prop2")


class ParameterError(ValueError):
    pass


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class BlowupParams:
    """Sequence parameters of a staircase.

    ``N`` is the first rung pair and ``n_max`` the last; ``N=None`` picks
    the smallest admissible value (see :func:`minimal_start`) and
    ``n_max=None`` means ``N + 40``.  ``box_half_width`` defaults to
    ``L = max(R, 2 (ceil(X_1) + 1))``; with the default inner half-width
    ``L/2`` the inner box then contains the whole staircase.
    """

    construction: str = "prop1"
    zeta: int = 1
    d: int = 2
    eps: float = 1.0 / 30.0
    R: float = 1.0
    N: int | None = None
    n_max: int | None = None
    box_half_width: float | None = None
    inner_fraction: float = 0.5

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise ParameterError(f"unknown construction {self.construction!r}")
        if not self.eps > 0:
            raise ParameterError("eps must be positive")
        if not self.R > 0:
            raise ParameterError("R must be positive")
        if self.construction == "prop2" and self.d != 2:
            raise ParameterError("prop2 is two-dimensional")
        if self.zeta < 1 or self.d < 1:
            raise ParameterError("zeta and d must be >= 1")
        if not self.alpha < 1:
            raise ParameterError(f"blow-up exponent alpha'={self.alpha} must be < 1")
        if not 0 < self.inner_fraction < 1:
            raise ParameterError("inner_fraction must lie in (0, 1)")

    @property
    def k(self) -> int:
        """Exponent of the planar characteristic speed ``g'(u) = u^k``."""
        return self.zeta + self.d if self.construction == "prop1" else 3

    @property
    def alpha(self) -> float:
        return 1.0 / self.k + self.eps

    @property
    def q(self) -> float:
        """Decay exponent of the rung widths, ``k * alpha' = 1 + k*eps``."""
        return self.k * self.alpha

    @property
    def tail_exponent(self) -> int:
        return self.d + 4 if self.construction == "prop1" else 6

    @property
    def tail_value(self) -> float:
        return self.R ** (-self.tail_exponent)

    @property
    def start(self) -> int:
        return minimal_start(self) if self.N is None else int(self.N)

    @property
    def last(self) -> int:
        """Last rung pair; ``n_max=None`` means ``N + 40``."""
        return self.start + 40 if self.n_max is None else int(self.n_max)

    def check(self) -> None:
        """Raise :class:`ParameterError` naming the first violated inequality."""
        n = self.start
        if n < 1:
            raise ParameterError("N must be >= 1")
        if not (1.0 + 1.0 / n) ** self.alpha < 2.0:
            raise ParameterError(f"(1+1/N)^alpha' < 2 fails for N={n}")
        if not 1.0 / n < self.tail_value:
            raise ParameterError(f"1/N < tail value R^-{self.tail_exponent} fails for N={n}")
        if self.last < n:
            raise ParameterError("n_max must be >= N")

    def flux(self, u_bound: float | None = None) -> FluxSpec:
        bound = 2.0 * max(self.sigma_max, self.tail_value) if u_bound is None else u_bound
        if self.construction == "prop1":
            return FluxSpec.power_law(self.zeta, self.d, bound)
        return FluxSpec.prop2_pair(bound)

    @property
    def direction(self) -> tuple[float, ...]:
        if self.construction == "prop1":
            return (1.0,) + (0.0,) * (self.d - 1)
        return (1.0, -1.0)

    @property
    def sigma_max(self) -> float:
        return 2.0 / (self.R * self.start**self.alpha)


def closed_form_times(k: int, R: float) -> tuple[float, float]:
    """Closed-form interaction times for fan exponent ``k``: (characteristic from the
    plateau's left edge meets the shock, shock meets the next fan's left edge)."""
    t_n = R**k * (k + 1) / (2.0**k * (k - 1) + 1)
    t_tilde = R**k * (k + 1) / (2.0 ** (k + 1) - (k + 2))
    return t_n, t_tilde


def minimal_start(params: BlowupParams) -> int:
    """Smallest N meeting the construction's inequalities.

    Besides ``(1+1/N)^alpha' < 2`` and ``1/N < tail``, we require that the
    shock of every rung meets the following fan later than the preceding
    characteristic does; with the true rung widths that crossing happens at
    ``t~ (n/(n+1))^q``, so small N can make it the first interaction.
    """
    t_n, t_tilde = closed_form_times(params.k, params.R)
    n = max(1, math.floor(params.R**params.tail_exponent) + 1)
    while True:
        ok = (1.0 + 1.0 / n) ** params.alpha < 2.0 and 1.0 / n < params.tail_value
        ok = ok and t_tilde * (n / (n + 1.0)) ** params.q > t_n
        if ok:
            return n
        n += 1


@dataclass
class RungSequences:
    """Rung data for ``m = 2N .. 2 n_max + 2``.

    ``sigma`` is defined up to ``m = 2 n_max + 1`` (the last plateau).
    ``X1`` is the limit of ``w_m``: the truncated sum plus the exact
    remainder ``2 * zeta_H(q, n_max + 1)``.
    """

    m: np.ndarray
    n: np.ndarray
    l: np.ndarray
    sigma: np.ndarray
    w: np.ndarray
    X1: float
    params: BlowupParams

    def index(self, m: int) -> int:
        return int(m - self.m[0])


def build_rungs(params: BlowupParams) -> RungSequences:
    params.check()
    N = params.start
    m = np.arange(2 * N, 2 * params.last + 3)
    n = m // 2
    l = n.astype(float) ** (-params.q)
    sigma = np.where(m % 2 == 0, 2.0, 1.0) / (params.R * n.astype(float) ** params.alpha)
    # extended-precision running sum keeps the rung widths w_{m+1} - w_m accurate
    w = np.cumsum(l.astype(np.longdouble)).astype(float)
    remainder = 2.0 * float(hurwitz_zeta(params.q, params.last + 1))
    X1 = float(w[-2]) + remainder
    return RungSequences(m=m, n=n, l=l, sigma=sigma[:-1], w=w, X1=X1, params=params)


def box_half_width(params: BlowupParams, rungs: RungSequences | None = None) -> float:
    if params.box_half_width is not None:
        return float(params.box_half_width)
    rungs = build_rungs(params) if rungs is None else rungs
    return float(max(params.R, 2 * (math.ceil(rungs.X1) + 1)))


def build_single_box(params: BlowupParams, flux: FluxSpec | None = None, direction=None,
                     offset: float = 0.0) -> PlanarProfile:
    """Initial staircase of one box, in the coordinate ``m = xi0 . (x - c)``.

    ``offset`` translates the box centre ``c`` to ``offset * e_1``; the
    breakpoints stay box-local, so a translated box evaluates exactly like
    the original at ``x - c``.
    """
    rungs = build_rungs(params)
    flux = params.flux() if flux is None else flux
    direction = params.direction if direction is None else tuple(float(v) for v in direction)
    top = max(float(rungs.sigma.max()), params.tail_value)
    eff = effective_flux(flux, direction)
    lo, hi = eff.window
    if not (lo <= 0.0 and hi >= top):
        raise ConstructionError(f"effective flux not strictly convex on [0, {top}]")
    if abs(float(eff.dg(0.0))) > 1e-14:
        raise ConstructionError("the construction needs g'(0) = 0")
    L = box_half_width(params, rungs)
    if rungs.w[-1] >= L * sum(abs(v) for v in direction):
        raise ConstructionError("box too small for the staircase")
    m_hi = L * sum(abs(v) for v in direction)
    edges = np.concatenate([rungs.w, [m_hi]])
    values = np.concatenate([rungs.sigma, [params.tail_value]])
    rung = np.concatenate([rungs.m[:-1], [-1]])
    d = len(direction)
    center = (offset,) + (0.0,) * (d - 1)
    return PlanarProfile.from_constants(
        edges, values, rung=rung, direction=direction, dimension=d, box_center=center,
        box_half_width=L, inner_half_width=params.inner_fraction * L,
        meta={"construction": params.construction, "zeta": params.zeta, "d": params.d,
              "eps": params.eps, "R": params.R, "N": params.start, "n_max": params.last,
              "alpha": params.alpha, "X1": rungs.X1, "offset": offset},
    )


def build_riemann(a: float, b: float, direction, box_half_width: float = 1.0,
                  inner_fraction: float = 0.5) -> PlanarProfile:
    """Two-state datum: ``a`` where ``xi0 . x < 0`` and ``b`` where it is positive,
    inside the box ``[-L, L]^d``; zero outside."""
    direction = tuple(float(v) for v in direction)
    if not any(direction):
        raise ParameterError("direction must be nonzero")
    m_hi = box_half_width * sum(abs(v) for v in direction)
    return PlanarProfile.from_constants(
        [-m_hi, 0.0, m_hi], [a, b], rung=[-1, -1], direction=direction, dimension=len(direction),
        box_center=(0.0,) * len(direction), box_half_width=box_half_width,
        inner_half_width=inner_fraction * box_half_width,
        meta={"construction": "lemma1-riemann", "a": a, "b": b})


# ---------------------------------------------------------------------------
# tiling
# ---------------------------------------------------------------------------


@dataclass
class TileBox:
    offset: float  # Y_{k-1}
    params: BlowupParams
    half_width: float
    t0: float
    max_speed: float


@dataclass
class Tiling:
    boxes: list[TileBox]
    gaps: list[float] = field(default_factory=list)
    certificates: list[float] = field(default_factory=list)
    time_gap: float = 1.0

    @property
    def t0(self) -> np.ndarray:
        return np.array([b.t0 for b in self.boxes])

    @property
    def l1_partial_sums(self) -> np.ndarray:
        """Partial sums of ``R_k^d * tail_k``."""
        terms = [b.params.R**b.params.d * b.params.tail_value for b in self.boxes]
        return np.cumsum(terms)

    @property
    def l1_analytic_bound(self) -> float:
        """Bound for distinct integer radii ``R_k >= 1``: ``sum_j j^(d - tail_exponent)``."""
        p = self.boxes[0].params
        return float(hurwitz_zeta(p.tail_exponent - p.d, 1))

    def disjoint(self) -> bool:
        spans = sorted((b.offset - b.half_width, b.offset + b.half_width) for b in self.boxes)
        return all(a[1] < b[0] for a, b in zip(spans, spans[1:]))

    def profiles(self) -> list[PlanarProfile]:
        return [build_single_box(b.params, offset=b.offset) for b in self.boxes]


def build_tiling(base: BlowupParams, K: int, flux: FluxSpec | None = None, direction=None,
                 time_gap: float = 1.0, max_doublings: int = 12) -> Tiling:
    """K translated boxes along ``e_1`` with growing validity windows.

    ``R`` doubles until ``t0^{k+1} > t0^k + time_gap``.  The offset
    ``Y_k`` leaves a gap ``2 V t0^{k+1} + 1`` between neighbouring boxes,
    ``V`` the largest per-axis characteristic speed over all boxes, so no
    wave from one box reaches another before ``t0^{k+1}``.
    """
    from .exact import build_schedule  # local import: exact depends on this module

    if K < 1:
        raise ParameterError("K must be >= 1")
    if base.construction == "prop1" and direction is not None and tuple(direction) != base.direction:
        raise ParameterError("tiling translates along e_1 with the construction's direction")

    def make(params: BlowupParams) -> TileBox:
        prof = build_single_box(params, flux, direction)
        sched = build_schedule(prof, params=params, spec=flux or params.flux())
        return TileBox(offset=0.0, params=params, half_width=prof.box_half_width,
                       t0=sched.t0, max_speed=sched.max_speed)

    boxes = [make(base)]
    for _ in range(1, K):
        prev = boxes[-1]
        R = prev.params.R
        for _ in range(max_doublings):
            R *= 2
            cand = make(_with_R(base, R))
            if cand.t0 > prev.t0 + time_gap:
                break
        else:
            raise ConstructionError("could not separate validity windows")
        boxes.append(cand)

    v = max(b.max_speed for b in boxes)
    gaps, certs = [], []
    for k in range(1, K):
        prev, box = boxes[k - 1], boxes[k]
        gap = 2.0 * v * box.t0 + 1.0
        box.offset = prev.offset + prev.half_width + box.half_width + gap
        gaps.append(gap)
        certs.append(gap / (2.0 * v))
    return Tiling(boxes=boxes, gaps=gaps, certificates=certs, time_gap=time_gap)


def _with_R(base: BlowupParams, R: float) -> BlowupParams:
    """Same construction at radius ``R``, keeping the number of rung pairs."""
    extra = base.last - base.start
    probe = replace(base, R=R, N=None, box_half_width=None)
    return replace(probe, n_max=probe.start + extra)
