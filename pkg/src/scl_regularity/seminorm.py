"""Directional Besov and BV quantities of planar profiles.

For data ``u(x) = phi(xi0 . x)`` in a slab of cross-section ``(2r)^(d-1)``
the shift ``x -> x + h e_i`` is the shift ``m -> m + h xi0_i``, so

    ||u(. + h e_i) - u||_p^p = (2r)^(d-1) int |phi(m + h xi0_i) - phi(m)|^p dm

and the right-hand side is integrated exactly over merged breakpoints.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .profile import FAN, PlanarProfile
from .staircase import BlowupParams, closed_form_times

logger = logging.getLogger(__name__)


class ZeroShiftWarning(UserWarning):
    """The shift direction is tangent to the level planes."""


@dataclass(frozen=True)
class SeminormQuery:
    """Parameters of a truncated directional Besov semi-norm.

    ``axis`` is 0-based (``e_{axis+1}``).  ``h_min``/``h_max`` bound the
    log-spaced scan with ``per_decade`` points per decade.
    """

    s: float
    p: float = 1.0
    theta: float = 1.0
    axis: int = 0
    h_min: float = 1e-4
    h_max: float = 1.0
    per_decade: int = 64
    n_max: int | None = None

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not 0 < self.h_min < self.h_max:
            raise ValueError("need 0 < h_min < h_max")
        if not all(np.isfinite([self.s, self.p, self.theta])):
            raise ValueError("s, p, theta must be finite")

    def h_grid(self) -> np.ndarray:
        decades = np.log10(self.h_max / self.h_min)
        n = max(2, int(np.ceil(decades * self.per_decade)) + 1)
        return np.logspace(np.log10(self.h_min), np.log10(self.h_max), n)


# ---------------------------------------------------------------------------
# shifted differences
# ---------------------------------------------------------------------------


def _piece_index(profile: PlanarProfile, m: np.ndarray) -> np.ndarray:
    """Piece containing each point, ``-1`` before and ``n`` after the profile."""
    return np.searchsorted(profile.edges, m, side="right") - 1


def _piece_integral(profile: PlanarProfile, k: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``int_a^b phi`` where ``[a, b]`` lies inside piece ``k`` (or the background)."""
    n = profile.n_pieces
    inside = (k >= 0) & (k < n)
    kk = np.clip(k, 0, n - 1)
    val = np.where(inside, profile.value[kk], profile.background)
    out = val * (b - a)
    fan = inside & (profile.kind[kk] == FAN)
    if np.any(fan):
        c, t = profile.center[kk[fan]], profile.time
        out = out.astype(float, copy=True)
        out[fan] = t * profile.flux.fan_integral((a[fan] - c) / t, (b[fan] - c) / t)
    return out


def _fan_root(profile: PlanarProfile, k_fan: np.ndarray, shift: np.ndarray, level: np.ndarray) -> np.ndarray:
    """Point where the fan ``k_fan`` (evaluated at ``m + shift``) equals ``level``."""
    return profile.center[k_fan] + profile.time * profile.flux.dg(level) - shift


def shifted_lp_difference(profile: PlanarProfile, h: float, p: float = 1.0, axis: int = 0,
                          cross_section: bool = True) -> float:
    """``||u(. + h e_axis) - u||_{L^p}`` of the planar function ``u = phi(xi0 . x)``.

    Constant pieces are integrated exactly.  For ``p = 1`` fan pieces are
    exact too: the difference is monotone on every merged interval (fan
    against constant) or of one sign (fan against fan), so splitting at the
    single root and integrating signed pieces suffices.  For other ``p``
    intervals touching a fan use adaptive quadrature.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    delta = h * profile.direction[axis]
    if delta == 0.0:
        if h > 0:
            warnings.warn("shift is tangent to the level planes; the difference vanishes",
                          ZeroShiftWarning, stacklevel=2)
        return 0.0
    e = profile.edges
    pts = np.unique(np.concatenate([e, e - delta]))
    # beyond the outermost finite breakpoints both copies sit on the same constant
    pts = pts[np.isfinite(pts)]
    a, b = pts[:-1], pts[1:]
    mid = 0.5 * (a + b)
    k0 = _piece_index(profile, mid)
    k1 = _piece_index(profile, mid + delta)
    n = profile.n_pieces
    is_fan0 = (k0 >= 0) & (k0 < n) & (profile.kind[np.clip(k0, 0, n - 1)] == FAN)
    is_fan1 = (k1 >= 0) & (k1 < n) & (profile.kind[np.clip(k1, 0, n - 1)] == FAN)
    fan_any = is_fan0 | is_fan1
    const = ~fan_any
    u0 = profile(mid[const])
    u1 = profile(mid[const] + delta)
    total = float(np.sum(np.abs(u1 - u0) ** p * (b[const] - a[const])))
    if np.any(fan_any):
        ia, ib, im = a[fan_any], b[fan_any], mid[fan_any]
        f0, f1 = is_fan0[fan_any], is_fan1[fan_any]
        kk0, kk1 = k0[fan_any], k1[fan_any]
        if p == 1:
            # split fan-vs-constant intervals at the crossing point
            r = ia.copy()
            only1 = f1 & ~f0
            only0 = f0 & ~f1
            if np.any(only1):
                r[only1] = _fan_root(profile, kk1[only1], delta, profile(im[only1]))
            if np.any(only0):
                r[only0] = _fan_root(profile, kk0[only0], 0.0, profile(im[only0] + delta))
            r = np.clip(r, ia, ib)

            def signed(lo, hi):
                return (_piece_integral(profile, kk1, lo + delta, hi + delta)
                        - _piece_integral(profile, kk0, lo, hi))

            total += float(np.sum(np.abs(signed(ia, r)) + np.abs(signed(r, ib))))
        else:
            for lo, hi in zip(ia, ib):
                def integrand(m):
                    return abs(float(profile(m + delta)) - float(profile(m))) ** p
                val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
                total += val
    if cross_section:
        total *= profile.cross_section
    return total ** (1.0 / p)


def lp_norm(profile: PlanarProfile, p: float = 1.0, cross_section: bool = True) -> float:
    """``||u||_{L^p}`` over the slab (exact for constant pieces)."""
    e = profile.edges
    w = np.diff(e)
    fin = np.isfinite(w)
    if profile.has_fans:
        total = 0.0
        for k in np.flatnonzero(fin):
            if profile.kind[k] == FAN:
                total += integrate.quad(lambda m: abs(float(profile(m))) ** p, e[k], e[k + 1],
                                        epsrel=1e-10, limit=200)[0]
            else:
                total += abs(profile.value[k]) ** p * w[k]
    else:
        total = float(np.sum(np.abs(profile.value[fin]) ** p * w[fin]))
    if cross_section:
        total *= profile.cross_section
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# Besov scan
# ---------------------------------------------------------------------------


@dataclass
class ScanResult:
    h: np.ndarray
    lp_diff: np.ndarray
    integrand: np.ndarray
    S: np.ndarray  # S[j] = int_{h[j]}^{h_max} integrand dh
    query: SeminormQuery
    kappa_fitted: float = np.nan
    kappa_naive: float = np.nan
    fit_range: tuple[float, float] = (np.nan, np.nan)
    meta: dict = field(default_factory=dict)

    @property
    def S_total(self) -> float:
        return float(self.S[0])


def _fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    ok = np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(ok) < 2:
        return np.nan
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def lp_scan(profile: PlanarProfile, h, p: float = 1.0, axis: int = 0, threads: int = 1) -> np.ndarray:
    """``||Delta^h u||_p`` at every ``h``; independent of ``s`` and ``theta``, so reusable."""
    h = [float(x) for x in np.asarray(h)]
    if threads <= 1:
        return np.array([shifted_lp_difference(profile, x, p, axis) for x in h])
    with ThreadPoolExecutor(threads) as pool:
        # map keeps the input order, so the result does not depend on scheduling
        return np.array(list(pool.map(lambda x: shifted_lp_difference(profile, x, p, axis), h)))


def truncated_besov(profile: PlanarProfile, query: SeminormQuery, trim_decades: float = 0.5,
                    lp: np.ndarray | None = None) -> ScanResult:
    """``S(h_min) = int_{h_min}^{h_max} ||Delta^h u||_p^theta h^(-1 - s theta) dh``.

    The quadrature is the trapezoid rule in ``log h``.  Two growth
    exponents are fitted over the scan minus ``trim_decades`` at each end:

    * ``kappa_fitted``: slope of ``log(dS/dlog(1/h))`` against ``log(1/h)``.
      If ``S ~ A h^-kappa + B`` this is exactly ``kappa``; the additive
      constant ``B`` from the upper limit does not bias it.
    * ``kappa_naive``: slope of ``log S`` itself, which ``B`` inflates when
      ``kappa`` is small.
    """
    h = query.h_grid()
    lp = lp_scan(profile, h, query.p, query.axis) if lp is None else np.asarray(lp, dtype=float)
    if lp.shape != h.shape:
        raise ValueError("precomputed differences do not match the h grid")
    integrand = lp**query.theta * h ** (-1.0 - query.s * query.theta)
    logh = np.log(h)
    density = integrand * h  # dS / dlog(1/h)
    pieces = 0.5 * (density[1:] + density[:-1]) * np.diff(logh)
    S = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    lo = query.h_min * 10**trim_decades
    hi = query.h_max * 10**-trim_decades
    sel = (h >= lo) & (h <= hi)
    with np.errstate(divide="ignore"):
        kappa = _fit_slope(-logh[sel], np.log(density[sel]))
        naive = _fit_slope(-logh[sel], np.log(S[sel]))
    return ScanResult(h=h, lp_diff=lp, integrand=integrand, S=S, query=query, kappa_fitted=kappa,
                      kappa_naive=naive, fit_range=(lo, hi))


def offset_free_exponent(h_min, S) -> tuple[float, float, float]:
    """Fit ``S = A h_min^-kappa + B`` and return ``(kappa, A, B)``.

    For each trial ``kappa`` the model is linear in ``(A, B)``; the residual
    is minimised over ``kappa`` in ``[-1, 1]``.  With three truncations and
    geometric ``h_min`` this reproduces the exact three-point solution.
    """
    x = np.log(1.0 / np.asarray(h_min, dtype=float))
    S = np.asarray(S, dtype=float)
    if len(S) < 3:
        raise ValueError("need at least three truncations")
    scale = float(np.max(np.abs(S))) or 1.0

    def solve(kappa):
        basis = np.column_stack([np.exp(kappa * x), np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(basis, S / scale, rcond=None)
        return coef, float(np.sum((basis @ coef - S / scale) ** 2))

    grid = np.linspace(-1.0, 1.0, 2001)
    k0 = grid[int(np.argmin([solve(k)[1] for k in grid]))]
    res = optimize.minimize_scalar(lambda k: solve(k)[1], bounds=(k0 - 1e-3, k0 + 1e-3), method="bounded",
                                   options={"xatol": 1e-12})
    coef, _ = solve(res.x)
    return float(res.x), float(coef[0] * scale), float(coef[1] * scale)


@dataclass
class TruncationFit:
    """Offset-free growth exponent of ``S`` across staircase truncations."""

    s: float
    kappa_closed: float
    kappa_fitted: float
    A: float
    B: float
    n_max: np.ndarray
    h_min: np.ndarray
    S: np.ndarray


def truncation_fit(params: BlowupParams, n_max_values, s_values, p: float = 1.0, theta: float = 1.0,
                   axis: int = 0, h_max: float = 1.0, per_decade: int = 64, t_fraction: float = 0.0,
                   threads: int = 1) -> list[TruncationFit]:
    """Fit ``S(h_min) = A h_min^-kappa + B`` with ``h_min = c_{n_max}`` for each truncation.

    Each truncation ``n_max`` is scanned down to its own rung scale, so the
    data always resolve the scan.  The shifted differences do not depend on
    ``s``, so one scan per truncation serves every ``s``.
    """
    from .exact import ExactSolution
    from .staircase import build_single_box

    n_max_values = np.asarray(n_max_values, dtype=np.int64)
    h_mins = rung_scale(params, n_max_values)
    S = {s: [] for s in s_values}
    for n, h_min in zip(n_max_values, h_mins):
        pn = replace(params, n_max=int(n))
        prof = build_single_box(pn)
        if t_fraction > 0:
            sol = ExactSolution.from_profile(prof, pn.flux(), pn)
            prof = sol.at(t_fraction * sol.t0)
        base = SeminormQuery(s=0.5, p=p, theta=theta, axis=axis, h_min=float(h_min), h_max=h_max,
                             per_decade=per_decade, n_max=int(n))
        lp = lp_scan(prof, base.h_grid(), p, axis, threads)
        for s in s_values:
            res = truncated_besov(prof, replace(base, s=s), lp=lp)
            S[s].append(res.S_total)
        logger.info("truncation n_max=%d scanned", n)
    out = []
    for s in s_values:
        kappa, A, B = offset_free_exponent(h_mins, S[s])
        out.append(TruncationFit(s=s, kappa_closed=kappa_closed_form(params, s, p, theta), kappa_fitted=kappa,
                                 A=A, B=B, n_max=n_max_values, h_min=h_mins, S=np.array(S[s])))
    return out


def kappa_closed_form(params: BlowupParams, s: float, p: float = 1.0, theta: float = 1.0) -> float:
    """``(s - 1/k) theta (1 + k eps) - k eps / p`` with ``k = zeta + d``."""
    k = params.k
    return (s - 1.0 / k) * theta * (1.0 + k * params.eps) - k * params.eps / p


def rung_scale(params: BlowupParams, n) -> np.ndarray:
    """``c_n = n^(-q)``: the shift length matching the width of rung pair ``n``."""
    return np.asarray(n, dtype=float) ** (-params.q)


def rung_count(params: BlowupParams, h) -> np.ndarray:
    """``M(h) = floor(h^(-1/q))``: number of rung pairs wider than ``h``."""
    return np.floor(np.asarray(h, dtype=float) ** (-1.0 / params.q)).astype(np.int64)


# ---------------------------------------------------------------------------
# lower-bound series
# ---------------------------------------------------------------------------


@dataclass
class LowerBoundSeries:
    kappa: float
    regime: str
    n: np.ndarray
    divergent: np.ndarray  # partial sums of n^-(1 - kappa)
    convergent: np.ndarray  # partial sums of n^-(2 - kappa)
    prefactor: float
    growth_fitted: float

    @property
    def valid(self) -> bool:
        return self.regime == "ok"


def lower_bound_series(params: BlowupParams, s: float, p: float = 1.0, theta: float = 1.0,
                       t: float = 0.0, n_terms: int = 10**6, samples: int = 200,
                       inner_half_width: float = 1.0) -> LowerBoundSeries:
    """Partial sums of ``sum n^-(1-kappa)`` (divergent) and ``sum n^-(2-kappa)``.

    ``prefactor = ((2r)^(d-1) (1 - t/t_n))^(theta/p)`` carries the time
    dependence of the lower bound; it requires ``t < t_n``.
    """
    t_n, _ = closed_form_times(params.k, params.R)
    if not 0 <= t < t_n:
        raise ValueError(f"t must lie in [0, t_n) = [0, {t_n})")
    kappa = kappa_closed_form(params, s, p, theta)
    if kappa <= 0:
        regime = "eps too large for this s"
    elif kappa >= 1:
        regime = "kappa >= 1"
    else:
        regime = "ok"
    N = params.start
    n = np.arange(N, N + n_terms, dtype=float)
    div = np.cumsum(n ** (kappa - 1.0))
    conv = np.cumsum(n ** (kappa - 2.0))
    idx = np.unique(np.geomspace(1, n_terms, samples).astype(np.int64)) - 1
    # sum n^(kappa-1) ~ n^kappa / kappa + const; fit the exponent with the constant removed
    sel = idx[n[idx] >= n[idx[-1]] / 100.0]
    growth = offset_free_exponent(1.0 / n[sel], div[sel])[0] if regime == "ok" else np.nan
    pref = ((2.0 * inner_half_width) ** (params.d - 1) * (1.0 - t / t_n)) ** (theta / p)
    return LowerBoundSeries(kappa=kappa, regime=regime, n=n[idx], divergent=div[idx],
                            convergent=conv[idx], prefactor=pref, growth_fitted=growth)


def shift_lower_bound(params: BlowupParams, n: int, t: float, p: float = 1.0,
                      inner_half_width: float = 1.0) -> float:
    """``((2r)^(d-1) (n - N) (1 - t/t_n) / n^(alpha' (p + k)))^(1/p)`` at ``h = c_n``."""
    t_n, _ = closed_form_times(params.k, params.R)
    val = ((2.0 * inner_half_width) ** (params.d - 1) * (n - params.start) * (1.0 - t / t_n)
           / n ** (params.alpha * (p + params.k)))
    return val ** (1.0 / p)


# ---------------------------------------------------------------------------
# total variation
# ---------------------------------------------------------------------------


def rung_end(profile: PlanarProfile, n: int) -> float:
    """Right end of the plateau of rung ``2n + 1`` (at the profile's time)."""
    k = np.flatnonzero(profile.rung == 2 * n + 1)
    if len(k) == 0:
        raise ValueError(f"rung {2 * n + 1} not present")
    return float(profile.edges[k[-1] + 1])


def tv_partial(profile: PlanarProfile, n: int | None = None, axis: int = 0) -> float:
    """Directional variation in ``e_axis`` times the cross-section.

    With ``n`` the variation is taken over ``m`` up to the end of rung
    ``2n + 1`` (the jump there excluded); fans contribute their swing.
    """
    if profile.direction[axis] == 0:
        return 0.0
    hi = np.inf if n is None else rung_end(profile, n)
    return profile.total_variation(-np.inf, hi) * profile.cross_section


def tv_growth_exponent(profile: PlanarProfile, n_values, axis: int = 0) -> tuple[np.ndarray, float]:
    """TV partial sums at ``n_values`` and their growth exponent.

    ``sum k^-alpha' = n^(1-alpha')/(1-alpha') + zeta(alpha') + ...`` with a
    sizeable constant, so ``TV = A n^beta + B`` is fitted rather than the
    plain slope of ``log TV``.
    """
    n_values = np.asarray(n_values)
    tv = np.array([tv_partial(profile, int(n), axis) for n in n_values])
    return tv, offset_free_exponent(1.0 / n_values.astype(float), tv)[0]


# ---------------------------------------------------------------------------
# elementary inequalities
# ---------------------------------------------------------------------------


def lemma2_check(x, beta) -> tuple[np.ndarray, np.ndarray]:
    """Truth of the two inequalities for ``x >= 1``, ``0 < beta < 1``:

        (x+1)^beta     > x^beta + beta/x^(1-beta) - beta(1-beta)/x^(2-beta)
        (x+1)^(1+beta) > x^(1+beta) + (1+beta) x^beta

    Both are divided by ``x^beta`` (resp. ``x^(1+beta)``) and evaluated
    with ``expm1``/``log1p`` so that large ``x`` does not cancel.
    """
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(x < 1) or np.any(~np.isfinite(x)):
        raise ValueError("x must be >= 1")
    if np.any((beta <= 0) | (beta >= 1)):
        raise ValueError("beta must lie in (0, 1)")
    y = 1.0 / x
    lp = np.log1p(y)
    first = np.expm1(beta * lp) > beta * y - beta * (1.0 - beta) * y * y
    second = np.expm1((1.0 + beta) * lp) > (1.0 + beta) * y
    return first, second


def lemma2_samples(n: int = 10**5, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Halton samples: ``x`` log-uniform on [1, 1e6], ``beta`` in (0.01, 0.99)."""
    from scipy.stats import qmc

    pts = qmc.Halton(2, scramble=True, seed=seed).random(n)
    x = 10.0 ** (6.0 * pts[:, 0])
    beta = 0.01 + 0.98 * pts[:, 1]
    return x, beta
