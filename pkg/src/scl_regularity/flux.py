"""Flux families, planar (effective) fluxes and the nondegeneracy exponent.

A flux is a map ``u -> (f_1(u), ..., f_d(u))``.  Three families are
supported:

* ``power-law``: ``f_k(u) = |u|^(zeta+d+2-k) / (zeta+d+2-k)``
* ``prop2-pair``: ``f_1(u) = (u^2+1)^2/4``, ``f_2(u) = u^2/2``
* ``polynomial``: arbitrary per-component coefficient lists (ascending order)

Data constant on the hyperplanes ``{xi0 . x = m}`` evolve under the scalar
flux ``g(u) = xi0 . f(u)``; :func:`effective_flux` builds it.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import minimize
from scipy.special import roots_legendre
from scipy.stats import norm, qmc

logger = logging.getLogger(__name__)

FAMILIES = ("power-law", "prop2-pair", "polynomial")


class FluxDomainError(ValueError):
    """State outside ``[-u_bound, u_bound]``."""


class ConvexityError(ValueError):
    """The effective flux has no strictly convex window."""


@dataclass(frozen=True)
class FluxSpec:
    dimension: int
    family: str
    u_bound: float = 3.0
    zeta: int | None = None
    coefficients: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown flux family {self.family!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.u_bound > 0:
            raise ValueError("u_bound must be positive")
        if self.family == "power-law" and (self.zeta is None or self.zeta < 1):
            raise ValueError("power-law flux needs an integer zeta >= 1")
        if self.family == "prop2-pair" and self.dimension != 2:
            raise ValueError("prop2-pair is two-dimensional")
        if self.family == "polynomial":
            if self.coefficients is None or len(self.coefficients) != self.dimension:
                raise ValueError("polynomial flux needs one coefficient list per component")

    @classmethod
    def power_law(cls, zeta: int, d: int, u_bound: float = 3.0) -> "FluxSpec":
        return cls(dimension=d, family="power-law", u_bound=u_bound, zeta=int(zeta))

    @classmethod
    def prop2_pair(cls, u_bound: float = 3.0) -> "FluxSpec":
        return cls(dimension=2, family="prop2-pair", u_bound=u_bound)

    @classmethod
    def polynomial(cls, coefficients: Sequence[Sequence[float]], u_bound: float = 3.0) -> "FluxSpec":
        coeffs = tuple(tuple(float(c) for c in comp) for comp in coefficients)
        return cls(dimension=len(coeffs), family="polynomial", u_bound=u_bound, coefficients=coeffs)

    @property
    def exponents(self) -> np.ndarray:
        """Power-law exponents ``zeta+d+2-k`` for k = 1..d."""
        k = np.arange(1, self.dimension + 1)
        return self.zeta + self.dimension + 2 - k

    def f(self, u) -> np.ndarray:
        """Flux components, shape ``u.shape + (d,)``.  No domain check."""
        u = np.asarray(u, dtype=float)
        if self.family == "power-law":
            p = self.exponents
            return np.abs(u)[..., None] ** p / p
        if self.family == "prop2-pair":
            return np.stack([(u * u + 1.0) ** 2 / 4.0, u * u / 2.0], axis=-1)
        return np.stack([npoly.polyval(u, c) for c in self.coefficients], axis=-1)

    def df(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.family == "power-law":
            p = self.exponents
            return np.sign(u)[..., None] * np.abs(u)[..., None] ** (p - 1)
        if self.family == "prop2-pair":
            return np.stack([u**3 + u, u], axis=-1)
        return np.stack([npoly.polyval(u, npoly.polyder(c)) for c in self.coefficients], axis=-1)

    def chord(self, a, b) -> np.ndarray:
        """Divided difference ``(f(a) - f(b)) / (a - b)`` without cancellation.

        Polynomial pieces are expanded as ``sum_i a^i b^(p-1-i)``; power-law
        states of opposite sign fall back to the plain quotient.
        """
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        if self.family == "power-law":
            p = self.exponents
            out = np.stack([_monomial_chord(np.abs(a), np.abs(b), int(e)) / e for e in p], axis=-1)
            sgn = np.where(a + b >= 0, 1.0, -1.0)[..., None]
            mixed = (a * b < 0)
            if np.any(mixed):
                raw = (self.f(a[mixed]) - self.f(b[mixed])) / (a[mixed] - b[mixed])[..., None]
                out[mixed] = raw
                sgn[mixed] = 1.0
            return sgn * out
        if self.family == "prop2-pair":
            s = a + b
            return np.stack([s * (a * a + b * b + 2.0) / 4.0, s / 2.0], axis=-1)
        return np.stack([sum(c[j] * _monomial_chord(a, b, j) for j in range(1, len(c))) + 0.0 * a
                         for c in self.coefficients], axis=-1)

    def max_speed(self, lo: float, hi: float, samples: int = 2049) -> float:
        """Per-axis characteristic speed bound ``max_k max_{u in [lo,hi]} |f_k'(u)|``."""
        u = np.linspace(lo, hi, samples)
        return float(np.max(np.abs(self.df(u))))


def _monomial_chord(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    # (a^p - b^p) / (a - b) = sum_{i<p} a^i b^(p-1-i), exact also for a == b
    out = np.zeros(np.broadcast(a, b).shape)
    for i in range(p):
        out = out + a**i * b ** (p - 1 - i)
    return out


def _check_domain(spec: FluxSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > spec.u_bound):
        raise FluxDomainError(f"|u| exceeds u_bound={spec.u_bound}")
    return u


def eval_flux(spec: FluxSpec, u) -> np.ndarray:
    return spec.f(_check_domain(spec, u))


def eval_flux_prime(spec: FluxSpec, u) -> np.ndarray:
    return spec.df(_check_domain(spec, u))


# ---------------------------------------------------------------------------
# effective flux
# ---------------------------------------------------------------------------

_GL_X, _GL_W = roots_legendre(24)


@dataclass(frozen=True)
class EffectiveFlux:
    """Scalar flux ``g = xi0 . f`` of a planar problem.

    ``monomial`` is ``(c, k)`` when ``g'(u) = c*sign(u)*|u|^k`` exactly, in
    which case fan inversion and fan integrals use closed forms.
    """

    spec: FluxSpec
    direction: tuple[float, ...]
    window: tuple[float, float]
    monomial: tuple[float, int] | None = None
    minimizer: float = 0.0

    def g(self, u) -> np.ndarray:
        return self.spec.f(u) @ np.asarray(self.direction)

    def dg(self, u) -> np.ndarray:
        return self.spec.df(u) @ np.asarray(self.direction)

    def chord(self, a, b) -> np.ndarray:
        """Shock speed ``(g(a) - g(b)) / (a - b)`` without cancellation."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.monomial is not None:
            c, k = self.monomial
            same = a * b >= 0
            sgn = np.where(a + b >= 0, 1.0, -1.0)
            mono = sgn * c * _monomial_chord(np.abs(a), np.abs(b), k + 1) / (k + 1)
            if np.all(same):
                return mono
            return np.where(same, mono, self.spec.chord(a, b) @ np.asarray(self.direction))
        return self.spec.chord(a, b) @ np.asarray(self.direction)

    def inv_dg(self, eta) -> np.ndarray:
        """Inverse of ``g'`` on the convexity window (the rarefaction profile)."""
        eta = np.asarray(eta, dtype=float)
        if self.monomial is not None:
            c, k = self.monomial
            return np.sign(eta) * (np.abs(eta) / c) ** (1.0 / k)
        lo, hi = self.window
        a = np.full(eta.shape, lo)
        b = np.full(eta.shape, hi)
        # bisection to 1e-14 absolute; 60 halvings of a window <= 2*u_bound suffice
        for _ in range(64):
            mid = 0.5 * (a + b)
            below = self.dg(mid) < eta
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
            if np.all(b - a < 1e-14):
                break
        return 0.5 * (a + b)

    def fan_integral(self, eta0, eta1) -> np.ndarray:
        """``int_{eta0}^{eta1} (g')^{-1}(eta) d eta`` elementwise."""
        eta0 = np.asarray(eta0, dtype=float)
        eta1 = np.asarray(eta1, dtype=float)
        if self.monomial is not None:
            c, k = self.monomial

            def prim(e):
                return c ** (-1.0 / k) * np.abs(e) ** (1.0 + 1.0 / k) * k / (k + 1.0)

            return prim(eta1) - prim(eta0)
        half = 0.5 * (eta1 - eta0)
        mid = 0.5 * (eta1 + eta0)
        nodes = mid[..., None] + half[..., None] * _GL_X
        return half * (self.inv_dg(nodes) @ _GL_W)


def _monomial_form(spec: FluxSpec, direction: np.ndarray) -> tuple[float, int] | None:
    nz = np.flatnonzero(np.abs(direction) > 0)
    if spec.family == "power-law" and len(nz) == 1 and nz[0] == 0 and direction[0] > 0:
        return float(direction[0]), int(spec.exponents[0] - 1)
    if spec.family == "prop2-pair" and direction[0] > 0 and direction[0] + direction[1] == 0:
        return float(direction[0]), 3
    return None


def effective_flux(spec: FluxSpec, direction, base_point: float = 0.0, samples: int = 4001) -> EffectiveFlux:
    """Planar flux ``g = xi0 . f`` with its convexity window.

    The window is the maximal run of sample cells on ``[-u_bound, u_bound]``
    where ``g'`` strictly increases, containing ``base_point``.
    """
    xi = np.asarray(direction, dtype=float)
    if xi.shape != (spec.dimension,):
        raise ValueError(f"direction must have {spec.dimension} components")
    if not np.any(xi != 0):
        raise ValueError("direction must be nonzero")
    u = np.linspace(-spec.u_bound, spec.u_bound, samples)
    dgs = spec.df(u) @ xi
    increasing = np.diff(dgs) > 0
    if not np.any(increasing):
        raise ConvexityError("no convexity window: g' is nowhere increasing")
    cell = int(np.clip(np.searchsorted(u, base_point, side="right") - 1, 0, samples - 2))
    if not increasing[cell]:
        # fall back to the longest increasing run
        runs = _runs(increasing)
        i0, i1 = max(runs, key=lambda r: r[1] - r[0])
    else:
        i0 = cell
        while i0 > 0 and increasing[i0 - 1]:
            i0 -= 1
        i1 = cell + 1
        while i1 < len(increasing) and increasing[i1]:
            i1 += 1
    window = (float(u[i0]), float(u[i1]))
    gvals = spec.f(u[i0 : i1 + 1]) @ xi
    minimizer = float(u[i0 + int(np.argmin(gvals))])
    mono = _monomial_form(spec, xi)
    if mono is not None:
        minimizer = 0.0
    return EffectiveFlux(spec=spec, direction=tuple(float(v) for v in xi), window=window,
                         monomial=mono, minimizer=minimizer)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    runs, start = [], None
    for i, v in enumerate(mask):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


# ---------------------------------------------------------------------------
# nondegeneracy exponent
# ---------------------------------------------------------------------------


def sphere_lattice(n: int, dim: int) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere of R^dim.

    Fibonacci spiral for dim=3; unscrambled Halton points pushed through the
    normal quantile and normalized otherwise.  Halton coordinates use distinct
    prime bases, so no point maps to the origin.
    """
    if dim == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        phi = np.pi * (3.0 - np.sqrt(5.0)) * i
        rho = np.sqrt(1.0 - z * z)
        return np.column_stack([z, rho * np.cos(phi), rho * np.sin(phi)])
    if dim == 2:
        theta = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(theta), np.sin(theta)])
    pts = qmc.Halton(dim, scramble=False).random(n + 1)[1:]
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class NondegeneracyResult:
    deltas: np.ndarray
    measures: np.ndarray
    alpha: float
    constant: float
    worst_direction: np.ndarray
    degenerate: bool = False
    zero_set_measures: tuple[float, float] = (0.0, 0.0)
    grid_spacing: float = 0.0
    refinement_change: float = 0.0
    directions_scanned: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def zero_set_shrinks(self) -> bool:
        """Condition (measure of the exact zero set vanishes under refinement)."""
        coarse, fine = self.zero_set_measures
        # a few grid cells around isolated roots is the discrete image of measure zero
        return fine <= max(0.75 * coarse, 4.0 * self.grid_spacing)


class _MeasureKernel:
    """Counts ``meas{|v|<R0 : |tau + f'(v).xi| < delta}`` on a uniform v grid."""

    def __init__(self, spec: FluxSpec, r0: float, v_grid: int, deltas: np.ndarray):
        self.dv = 2.0 * r0 / v_grid
        self.v = -r0 + (np.arange(v_grid) + 0.5) * self.dv
        self.fp = spec.df(self.v)
        self.deltas = np.asarray(deltas, dtype=float)

    def residual(self, direction: np.ndarray) -> np.ndarray:
        return direction[0] + self.fp @ direction[1:]

    def measures(self, direction: np.ndarray) -> np.ndarray:
        absp = np.abs(self.residual(direction))
        idx = np.searchsorted(self.deltas, absp, side="right")
        counts = np.cumsum(np.bincount(idx, minlength=len(self.deltas) + 1))[:-1]
        return counts * self.dv

    def smooth_measure(self, direction: np.ndarray, delta: float) -> float:
        p = self.residual(direction) / delta
        return float(np.sum(np.exp(-p * p)) * self.dv)


def _tangent_basis(x0: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.column_stack([x0, np.eye(len(x0))]))
    return q[:, 1:len(x0)]


def _refine_direction(kernel: _MeasureKernel, start: np.ndarray, delta_levels: np.ndarray) -> list[np.ndarray]:
    """Continuation in delta: maximize a Gaussian-smoothed measure, warm started."""
    x = start / np.linalg.norm(start)
    found = []
    for delta in delta_levels:
        basis = _tangent_basis(x)

        def point(y, x=x, basis=basis):
            z = x + basis @ y
            return z / np.linalg.norm(z)

        def objective(y, point=point, delta=delta):
            return -kernel.smooth_measure(point(y), delta)

        step = max(min(0.1, 3.0 * delta ** (1.0 / 3.0)), 1e-7)
        simplex = np.vstack([np.zeros(len(x) - 1), step * np.eye(len(x) - 1)])
        res = minimize(objective, np.zeros(len(x) - 1), method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": step * 1e-3,
                                "fatol": 1e-14, "maxfev": 120})
        x = point(res.x)
        found.append(x.copy())
    return found


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def nondegeneracy_exponent(
    spec: FluxSpec,
    r0: float | None = None,
    deltas: Sequence[float] | None = None,
    sphere_samples: int = 1000,
    v_grid: int = 1_000_000,
    refine_top: int = 2,
    shortlist_per_delta: int = 3,
    extra_directions: Sequence[Sequence[float]] = (),
    threads: int = 1,
    check_refinement: bool = True,
) -> NondegeneracyResult:
    """Estimate ``alpha`` in ``meas{|v|<R0, |tau+f'(v).xi|<delta} < C delta^alpha``.

    Directions ``(tau, xi)`` on the unit sphere of R^(1+d) come from a
    deterministic lattice, the ``extra_directions`` supplied by the caller,
    and a warm-started local refinement of the ``refine_top`` best lattice
    directions.  The sup over directions is taken per delta; ``alpha`` and
    ``C`` come from a least-squares fit of log(measure) on log(delta) over the
    middle 80% of the delta decades.
    """
    r0 = spec.u_bound if r0 is None else float(r0)
    if deltas is None:
        deltas = np.logspace(-8, -1, 57)
    deltas = np.sort(np.asarray(deltas, dtype=float))
    if deltas[0] <= 0 or deltas[-1] >= 1:
        raise ValueError("deltas must lie in (0, 1)")
    dim = spec.dimension + 1
    kernel = _MeasureKernel(spec, r0, v_grid, deltas)
    coarse = _MeasureKernel(spec, r0, max(v_grid // 10, 100_000), deltas)

    lattice = sphere_lattice(sphere_samples, dim)
    extra = [np.asarray(e, dtype=float) / np.linalg.norm(e) for e in extra_directions]

    def scan(k, dirs):
        return np.array([k.measures(x) for x in dirs]).reshape(len(dirs), len(deltas))

    def pscan(k, dirs):
        if threads <= 1 or len(dirs) < 2 * threads:
            return scan(k, dirs)
        chunks = np.array_split(np.arange(len(dirs)), threads)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda ix: scan(k, [dirs[i] for i in ix]), chunks))
        return np.vstack(parts)

    rough = pscan(coarse, list(lattice))

    # refine from the best lattice directions at the largest delta of the fit range
    logd = np.log10(deltas)
    span = logd[-1] - logd[0]
    fit_mask = (logd >= logd[0] + 0.1 * span - 1e-12) & (logd <= logd[-1] - 0.1 * span + 1e-12)
    ranking_col = int(np.flatnonzero(fit_mask)[-1])
    order = np.argsort(-rough[:, ranking_col], kind="stable")
    levels = np.logspace(logd[-1], logd[0], int(round(span)) + 1)
    refined = []
    for i in order[:refine_top]:
        refined.extend(_refine_direction(coarse, lattice[i], levels))

    # full-resolution sup over a shortlist: per-delta leaders of the coarse scan,
    # every refined direction and every caller-supplied direction
    shortlist = set(np.argsort(-rough, axis=0, kind="stable")[:shortlist_per_delta].ravel().tolist())
    candidates = [lattice[i] for i in sorted(shortlist)] + extra + refined
    table = pscan(kernel, candidates)

    sup = table.max(axis=0)
    worst_idx = int(np.argmax(table[:, 0] if sup[0] > 0 else table[:, -1]))
    worst = np.asarray(candidates[worst_idx])
    result = NondegeneracyResult(deltas=deltas, measures=sup, alpha=float("nan"),
                                 constant=float("nan"), worst_direction=worst,
                                 directions_scanned=len(lattice) + len(extra) + len(refined))

    # zero set of the worst direction on the grid and on the doubled grid
    fine = _MeasureKernel(spec, r0, 2 * v_grid, deltas)
    scale = max(1.0, float(np.max(np.abs(kernel.residual(worst)))))
    tiny = 64 * np.finfo(float).eps * scale
    z0 = float(np.count_nonzero(np.abs(kernel.residual(worst)) <= tiny) * kernel.dv)
    z1 = float(np.count_nonzero(np.abs(fine.residual(worst)) <= tiny) * fine.dv)
    result.zero_set_measures = (z0, z1)
    result.grid_spacing = fine.dv

    if sup[0] >= 0.5 * sup[-1] or z1 > 0.5 * 2 * r0:
        result.degenerate = True
        result.notes.append("degenerate direction: measure does not vanish as delta -> 0")
        logger.warning("degenerate direction %s", worst)
        return result

    y = sup[fit_mask]
    if np.any(y <= 0):
        result.notes.append("zero measures inside the fit range; grid too coarse")
        return result
    slope, intercept = _loglog_fit(deltas[fit_mask], y)
    result.alpha = slope
    result.constant = float(np.exp(intercept))

    if check_refinement:
        worst_fine = table[worst_idx]
        doubled = fine.measures(worst)
        rel = np.abs(doubled - worst_fine)[fit_mask] / np.maximum(worst_fine[fit_mask], 1e-300)
        result.refinement_change = float(rel.max())
        if result.refinement_change > 0.01:
            result.notes.append(f"grid refinement changed measures by {result.refinement_change:.3%}")
    return result
