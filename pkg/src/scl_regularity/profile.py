"""Piecewise constant-or-fan functions of the planar coordinate ``m = xi0 . x``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from .flux import EffectiveFlux

CONST, FAN = 0, 1


@dataclass
class PlanarProfile:
    """Function of one scalar coordinate, constant or self-similar fan per piece.

    Piece ``k`` occupies ``(edges[k], edges[k+1])``.  Constant pieces hold
    ``value[k]``; fan pieces hold ``(g')^{-1}((m - center[k]) / time)``.
    Outside ``[edges[0], edges[-1]]`` the profile equals ``background``;
    the outermost edges may be infinite.

    ``rung`` tags constant pieces with their staircase index (-1 for
    anything else).  The geometric header (``direction``, ``dimension``,
    box and inner half-widths) ties the profile to R^d: a point ``x`` has
    coordinate ``m = direction . (x - box_center)``.
    """

    edges: np.ndarray
    kind: np.ndarray
    value: np.ndarray
    center: np.ndarray
    rung: np.ndarray
    time: float = 0.0
    flux: "EffectiveFlux | None" = None
    background: float = 0.0
    direction: tuple[float, ...] = (1.0,)
    dimension: int = 1
    box_center: tuple[float, ...] = (0.0,)
    box_half_width: float = np.inf
    inner_half_width: float = np.inf
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.kind = np.asarray(self.kind, dtype=np.int8)
        self.value = np.asarray(self.value, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        self.rung = np.asarray(self.rung, dtype=np.int64)
        n = len(self.kind)
        if len(self.edges) != n + 1 or not (len(self.value) == len(self.center) == len(self.rung) == n):
            raise ValueError("inconsistent piece arrays")
        if np.any(np.diff(self.edges) < 0):
            raise ValueError("breakpoints must be nondecreasing")
        if np.any(self.kind == FAN) and (self.flux is None or self.time <= 0):
            raise ValueError("fan pieces need an effective flux and a positive time")

    @classmethod
    def from_constants(cls, edges, values, rung=None, **header) -> "PlanarProfile":
        values = np.asarray(values, dtype=float)
        n = len(values)
        return cls(edges=np.asarray(edges, dtype=float), kind=np.zeros(n, np.int8), value=values,
                   center=np.full(n, np.nan), rung=np.full(n, -1) if rung is None else rung, **header)

    @property
    def n_pieces(self) -> int:
        return len(self.kind)

    @property
    def has_fans(self) -> bool:
        return bool(np.any(self.kind == FAN))

    @property
    def cross_section(self) -> float:
        """Transverse volume ``(2r)^(d-1)`` of the inner box."""
        if self.dimension == 1:
            return 1.0
        return float((2.0 * self.inner_half_width) ** (self.dimension - 1))

    def with_header(self, **changes) -> "PlanarProfile":
        return replace(self, **changes)

    # -- evaluation -------------------------------------------------------

    def _fan_values(self, m, k):
        return self.flux.inv_dg((m - self.center[k]) / self.time)

    def __call__(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        k = np.searchsorted(self.edges, m, side="right") - 1
        inside = (k >= 0) & (k < self.n_pieces)
        kk = np.clip(k, 0, self.n_pieces - 1)
        out = np.where(inside, self.value[kk], self.background)
        fan = inside & (self.kind[kk] == FAN)
        if np.any(fan):
            out = out.astype(float, copy=True)
            out[fan] = self._fan_values(m[fan], kk[fan])
        return out

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        """Values at the left and right ends of every piece."""
        left = self.value.copy()
        right = self.value.copy()
        fan = self.kind == FAN
        if np.any(fan):
            left[fan] = self._fan_values(self.edges[:-1][fan], np.flatnonzero(fan))
            right[fan] = self._fan_values(self.edges[1:][fan], np.flatnonzero(fan))
        return left, right

    def state_range(self) -> tuple[float, float]:
        left, right = self.limits()
        vals = np.concatenate([left, right, [self.background]])
        return float(vals.min()), float(vals.max())

    # -- integrals ----------------------------------------------------------

    def antiderivative(self, m, lo: float | None = None, hi: float | None = None) -> np.ndarray:
        """``int_{lo}^{m} u``; infinite edges are clipped to ``[lo, hi]``."""
        m = np.asarray(m, dtype=float)
        lo = float(np.min(m)) if lo is None else lo
        hi = float(np.max(m)) if hi is None else hi
        edges = np.clip(self.edges, lo, hi)
        widths = np.diff(edges)
        piece_int = self.value * widths
        fan = self.kind == FAN
        if np.any(fan):
            e0 = (edges[:-1][fan] - self.center[fan]) / self.time
            e1 = (edges[1:][fan] - self.center[fan]) / self.time
            piece_int = piece_int.copy()
            piece_int[fan] = self.time * self.flux.fan_integral(e0, e1)
        cum = np.concatenate([[0.0], np.cumsum(piece_int)])
        # background before the first edge
        base = self.background * (edges[0] - lo)
        mm = np.clip(m, lo, hi)
        k = np.searchsorted(edges, mm, side="right") - 1
        before = k < 0
        after = k >= self.n_pieces
        kk = np.clip(k, 0, self.n_pieces - 1)
        partial = self.value[kk] * (mm - edges[kk])
        fanm = (self.kind[kk] == FAN) & ~before & ~after
        if np.any(fanm):
            kf = kk[fanm]
            partial = partial.copy()
            partial[fanm] = self.time * self.flux.fan_integral(
                (edges[kf] - self.center[kf]) / self.time, (mm[fanm] - self.center[kf]) / self.time)
        out = base + cum[kk] + partial
        out = np.where(before, self.background * (mm - lo), out)
        out = np.where(after, base + cum[-1] + self.background * (mm - edges[-1]), out)
        return out

    def cell_averages(self, cell_edges) -> np.ndarray:
        """Exact averages over consecutive cells."""
        cell_edges = np.asarray(cell_edges, dtype=float)
        a = self.antiderivative(cell_edges, lo=cell_edges[0], hi=cell_edges[-1])
        return np.diff(a) / np.diff(cell_edges)

    def total_variation(self, lo: float = -np.inf, hi: float = np.inf) -> float:
        """1-D variation of the restriction to ``(lo, hi)`` (fans count their swing)."""
        left, right = self.limits()
        ext_left = np.concatenate([left, [self.background]])
        ext_right = np.concatenate([[self.background], right])
        jumps = np.abs(ext_left - ext_right)  # jump at each edge
        inside = (self.edges > lo) & (self.edges < hi)
        tv = float(np.sum(jumps[inside]))
        swing = np.abs(right - left)
        a = np.maximum(self.edges[:-1], lo)
        b = np.minimum(self.edges[1:], hi)
        part = b > a
        full = part & (self.edges[:-1] >= lo) & (self.edges[1:] <= hi)
        tv += float(np.sum(swing[full]))
        partial = part & ~full & (self.kind == FAN)
        for k in np.flatnonzero(partial):
            va, vb = self(np.array([a[k], b[k]]))
            tv += abs(vb - va)
        return tv

    # -- serialization ------------------------------------------------------

    def header(self) -> dict[str, Any]:
        return {
            "direction": list(self.direction),
            "dimension": self.dimension,
            "box_center": list(self.box_center),
            "box_half_width": self.box_half_width,
            "inner_half_width": self.inner_half_width,
            "background": self.background,
            "time": self.time,
            "meta": self.meta,
        }

    def to_text(self) -> str:
        """Plain-text table ``m_left kind value rung`` with a JSON header.

        Fan rows carry their center in the value column.  A final ``end``
        row records the right edge.  Numbers use 17 significant digits.
        """
        lines = ["# " + json.dumps(self.header(), sort_keys=True, default=_jsonable)]
        lines.append("# m_left kind value rung")
        for k in range(self.n_pieces):
            kind = "fan" if self.kind[k] == FAN else "const"
            val = self.center[k] if self.kind[k] == FAN else self.value[k]
            lines.append(f"{self.edges[k]:.17g} {kind} {val:.17g} {int(self.rung[k])}")
        lines.append(f"{self.edges[-1]:.17g} end")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, flux: "EffectiveFlux | None" = None) -> "PlanarProfile":
        rows = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(rows[0][1:].strip())
        edges, kinds, values, centers, rungs = [], [], [], [], []
        for ln in rows[1:]:
            if ln.startswith("#"):
                continue
            parts = ln.split()
            edges.append(float(parts[0]))
            if parts[1] == "end":
                break
            fan = parts[1] == "fan"
            kinds.append(FAN if fan else CONST)
            values.append(np.nan if fan else float(parts[2]))
            centers.append(float(parts[2]) if fan else np.nan)
            rungs.append(int(parts[3]))
        return cls(edges=np.array(edges), kind=np.array(kinds, np.int8), value=np.array(values),
                   center=np.array(centers), rung=np.array(rungs), time=float(header["time"]),
                   flux=flux, background=float(header["background"]),
                   direction=tuple(header["direction"]), dimension=int(header["dimension"]),
                   box_center=tuple(header["box_center"]),
                   box_half_width=float(header["box_half_width"]),
                   inner_half_width=float(header["inner_half_width"]), meta=header["meta"])


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))
