"""Boundary graph charts and a subordinated partition of unity.

A chart describes a stretch of the boundary as the graph y_n = phi(y_1) in
a local orthonormal frame whose y_n axis is the outward normal at the
anchor point; the domain side of the stretch is y_n < phi(y_1).  Chart
weight functions are quintic-smoothstep box bumps, normalized pointwise by
their sum plus an interior bump, which makes the weights a partition of
unity on the closed domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .domains import DomainError, DomainSpec

__all__ = ["Chart", "PartitionOfUnity", "ChartError", "CoverageError", "build_charts"]

# bump support is shrunk to 0.98 of the box so the (closed) support stays
# inside the open box; the outer 50% of the support tapers from 1 to 0
_SUPPORT = 0.98
_TAPER = 0.5
_MAX_TANGENT_TURN = 1.1  # radians; keeps the boundary a graph over the chart axis


class ChartError(ValueError):
    """Chart construction failed."""


class CoverageError(ValueError):
    """The charts fail to cover the boundary (or the partition has a gap)."""


def smoothstep(t):
    """Quintic smoothstep: 0 below 0, 1 above 1, C^2 in between."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (6.0 * t - 15.0))


def bump_profile(y, a):
    """C^2 plateau bump on (-a, a): 1 for |y| <= 0.49 a, 0 for |y| >= 0.98 a."""
    q = (_SUPPORT * a - np.abs(y)) / (_TAPER * _SUPPORT * a)
    return smoothstep(q)


@dataclass
class Chart:
    """One boundary graph chart.

    The box is {|y_1| < half_width} x {|y_n| < half_height} in the frame
    (tangent, normal_axis) centered at origin; phi and its derivative are
    evaluated by inverting the arclength coordinate along the curve with a
    guarded Newton iteration.
    """

    curve: object
    t_anchor: float
    origin: np.ndarray
    tangent: np.ndarray
    normal_axis: np.ndarray
    half_width: float
    half_height: float
    t_window: tuple
    _t_samples: np.ndarray = field(repr=False, default=None)
    _y1_samples: np.ndarray = field(repr=False, default=None)

    def to_local(self, pts: np.ndarray) -> tuple:
        rel = pts - self.origin
        return rel @ self.tangent, rel @ self.normal_axis

    def _solve_param(self, y1: np.ndarray) -> np.ndarray:
        """Invert y1(t) = tangent . (curve(t) - origin) on the chart window."""
        t = np.interp(y1, self._y1_samples, self._t_samples)
        lo, hi = self.t_window
        for _ in range(60):
            pts = self.curve.point(t)
            vel = self.curve.velocity(t)
            f = (pts - self.origin) @ self.tangent - y1
            df = vel @ self.tangent
            step = f / df
            t = np.clip(t - step, lo, hi)
            if np.max(np.abs(f)) < 1e-13 * max(1.0, self.half_width):
                break
        return t

    def graph(self, y1) -> tuple:
        """phi(y1) and phi'(y1) for |y1| < half_width."""
        y1 = np.asarray(y1, dtype=float)
        t = self._solve_param(y1)
        pts = self.curve.point(t)
        vel = self.curve.velocity(t)
        phi = (pts - self.origin) @ self.normal_axis
        dphi = (vel @ self.normal_axis) / (vel @ self.tangent)
        return phi, dphi

    def boundary_normal(self, y1) -> np.ndarray:
        """The chart's outward normal field, a function of y1 only."""
        _, dphi = self.graph(y1)
        s = np.sqrt(1.0 + dphi * dphi)
        return (-dphi / s)[:, None] * self.tangent + (1.0 / s)[:, None] * self.normal_axis

    def contains_local(self, y1, yn) -> np.ndarray:
        return (np.abs(y1) < self.half_width) & (np.abs(yn) < self.half_height)

    def bump_local(self, y1, yn) -> np.ndarray:
        return bump_profile(y1, self.half_width) * bump_profile(yn, self.half_height)


def build_charts(spec: DomainSpec, num_charts: int | None = None) -> list:
    """Cover the boundary of a smooth 2D domain with graph charts.

    The chart count doubles until every chart satisfies the graph property
    (tangent turn below the threshold) and neighbouring supports overlap.
    """
    if not spec.is_smooth or spec.dim != 2:
        raise ChartError(f"charts need a smooth planar boundary (kind {spec.kind!r})")
    curve = spec.curve
    perimeter = spec.boundary_measure()

    m = num_charts or 16
    while True:
        charts = _try_build(spec, curve, perimeter, m)
        if charts is not None:
            return charts
        if num_charts is not None:
            raise ChartError(f"cannot build a valid chart cover with {num_charts} charts")
        m *= 2
        if m > 512:
            raise ChartError("chart cover did not stabilize below 512 charts")


def _try_build(spec, curve, perimeter, m):
    ds = perimeter / m
    fine = spec.uniform_boundary_params(16 * m)
    anchors = fine[::16]
    vel_fine = curve.velocity(fine)
    ang_fine = np.unwrap(np.arctan2(vel_fine[:, 1], vel_fine[:, 0]))

    charts = []
    for k in range(m):
        idx = 16 * k
        # grow the window while the tangent stays within the turn budget
        lo_i, hi_i = idx, idx
        budget = _MAX_TANGENT_TURN
        limit = 24  # 1.5 ds per side
        while hi_i - idx < limit and abs(_ang(ang_fine, hi_i + 1) - ang_fine[idx]) < budget:
            hi_i += 1
        while idx - lo_i < limit and abs(_ang(ang_fine, lo_i - 1) - ang_fine[idx]) < budget:
            lo_i -= 1

        t0 = anchors[k]
        origin = curve.point(np.array([t0]))[0]
        tang = curve.velocity(np.array([t0]))[0]
        tang = tang / np.linalg.norm(tang)
        nrm = np.array([tang[1], -tang[0]])

        t_samples = _window_params(fine, lo_i, hi_i, curve.period)
        pts = curve.point(t_samples)
        y1 = (pts - origin) @ tang
        if np.any(np.diff(y1) <= 0):
            return None  # not a graph over the tangent; need more charts
        extent = min(-y1[0], y1[-1])
        if extent < 1.15 * ds:
            return None  # too little overlap with the neighbours
        half_width = min(1.35 * ds, 0.95 * extent)

        yn = (pts - origin) @ nrm
        inside = np.abs(y1) <= half_width
        max_phi = float(np.abs(yn[inside]).max()) if inside.any() else 0.0
        half_height = max(4.0 * max_phi, 0.4 * half_width)

        charts.append(Chart(curve, float(t0), origin, tang, nrm, float(half_width),
                            float(half_height), (float(t_samples[0]), float(t_samples[-1])),
                            _t_samples=t_samples, _y1_samples=y1))

    if not _boxes_clean(charts, curve, spec, fine):
        return None
    return charts


def _ang(ang_fine, i):
    n = len(ang_fine)
    # unwrapped angle continued periodically (total turn of a closed CCW curve is 2 pi)
    wrap, j = divmod(i, n)
    return ang_fine[j] + wrap * 2.0 * math.pi


def _window_params(fine, lo_i, hi_i, period):
    n = len(fine)
    idxs = np.arange(lo_i, hi_i + 1)
    wrap = np.floor_divide(idxs, n)
    return fine[np.mod(idxs, n)] + wrap * period


def _boxes_clean(charts, curve, spec, fine) -> bool:
    """No chart box may contain boundary points outside its own window."""
    pts = curve.point(fine)
    period = curve.period
    for ch in charts:
        y1, yn = ch.to_local(pts)
        inside = ch.contains_local(y1, yn)
        if not inside.any():
            continue
        lo, hi = ch.t_window
        t = fine[inside]
        in_window = (_wrap_dist(t, lo, period) <= (hi - lo)) | \
                    (_wrap_dist(np.full_like(t, lo), t, period) <= (hi - lo))
        ok = np.zeros(len(t), dtype=bool)
        for shift in (-period, 0.0, period):
            ok |= (t + shift >= lo - 1e-12) & (t + shift <= hi + 1e-12)
        if not np.all(ok):
            return False
        del in_window
    return True


def _wrap_dist(a, b, period):
    d = np.mod(b - a, period)
    return np.minimum(d, period - d)


@dataclass
class PartitionOfUnity:
    """Chart bumps plus an interior bump, normalized to sum to one on the domain.

    Weight index 0 is the interior function (support strictly inside the
    domain); weights 1..m follow the chart order.
    """

    spec: DomainSpec
    charts: list

    def __post_init__(self):
        fine = self.spec.boundary_loop(self.spec.boundary_measure() / 2048.0)
        self._btree = cKDTree(fine)
        # collar depth within which the chart bumps are guaranteed on plateau
        heights = np.array([ch.half_height for ch in self.charts])
        self._collar = float((_TAPER * _SUPPORT * heights).min()) * 0.5
        self._d0 = 0.5 * self._collar
        self._d1 = 1.5 * self._collar

    @property
    def num_weights(self) -> int:
        return len(self.charts) + 1

    @property
    def support_flags(self) -> list:
        return ["interior"] + ["chart"] * len(self.charts)

    def interior_bump(self, pts: np.ndarray) -> np.ndarray:
        depth, _ = self._btree.query(pts)
        raw = smoothstep((depth - self._d0) / (self._d1 - self._d0))
        return np.where(self.spec.contains(pts), raw, 0.0)

    def raw_bumps(self, pts: np.ndarray) -> np.ndarray:
        """Unnormalized bump values, shape (n, m+1)."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros((len(pts), self.num_weights))
        out[:, 0] = self.interior_bump(pts)
        for j, ch in enumerate(self.charts, start=1):
            y1, yn = ch.to_local(pts)
            out[:, j] = ch.bump_local(y1, yn)
        return out

    def weights(self, pts: np.ndarray) -> np.ndarray:
        """Normalized weights; rows sum to 1 wherever any bump is active."""
        raw = self.raw_bumps(pts)
        total = raw.sum(axis=1)
        safe = np.where(total > 0.0, total, 1.0)
        w = raw / safe[:, None]
        w[total == 0.0] = 0.0
        return w

    def min_cover(self, n_samples: int = 2000, seed: int = 7) -> float:
        """Smallest raw bump total over a sample of the closed domain."""
        rng = np.random.default_rng(seed)
        lo = self.spec.boundary_loop(self.spec.boundary_measure() / 256.0)
        box_lo, box_hi = lo.min(axis=0), lo.max(axis=0)
        pts = []
        while sum(len(p) for p in pts) < n_samples:
            cand = rng.uniform(box_lo, box_hi, size=(2 * n_samples, 2))
            cand = cand[self.spec.contains(cand)]
            pts.append(cand)
        pts = np.vstack(pts)[:n_samples]
        pts = np.vstack([pts, lo])  # include boundary points
        return float(self.raw_bumps(pts).sum(axis=1).min())
