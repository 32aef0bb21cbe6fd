"""Domain zoo: the 1D interval plus five planar test domains.

Each planar domain exposes an analytic boundary curve (point, velocity,
outward normal as functions of a parameter), a vectorized inside test,
and exact or high-accuracy area/perimeter values.  The square is the
deliberately non-smooth member of the zoo; every other 2D domain has a
continuously differentiable boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["DomainError", "DomainSpec"]

# lacunary radial perturbation used by the rough disk: few terms, rapidly
# increasing frequency, so the gradient stays small while the curvature
# oscillates violently
ROUGH_BASE = 3
ROUGH_TERMS = 4

_SMOOTH_KINDS = ("interval", "disk", "ellipse", "smoothed_polygon", "rough_disk")
_ALL_KINDS = _SMOOTH_KINDS + ("square",)


class DomainError(ValueError):
    """Domain parameters violate a construction constraint."""


def _rot_cw(v):
    """Rotate vectors clockwise by 90 degrees (tangent -> outward normal for CCW curves)."""
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class _EllipseCurve:
    """Boundary of an axis-aligned ellipse, parameter t in [0, 2*pi)."""

    def __init__(self, a: float, b: float):
        self.a = a
        self.b = b
        self.period = 2.0 * math.pi

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.sin(t), self.b * np.cos(t)], axis=-1)

    def normal(self, t):
        return _unit(_rot_cw(self.velocity(t)))


class _RoughDiskCurve:
    """Disk boundary with a truncated lacunary radial perturbation.

    radius(t) = R * (1 + amp * sum_k q^{-k(1+g)} cos(q^k t)),  q = ROUGH_BASE.

    The gradient series converges like q^{-k g} while curvature terms grow
    like q^{k (1-g)}: numerically a C^1 boundary whose curvature is wildly
    oscillating, which is the borderline regime the certificates must cover.
    """

    def __init__(self, base_radius: float, amplitude: float, hoelder: float):
        self.base_radius = base_radius
        self.amplitude = amplitude
        self.hoelder = hoelder
        ks = np.arange(1, ROUGH_TERMS + 1, dtype=float)
        self.freqs = float(ROUGH_BASE) ** ks
        self.coefs = float(ROUGH_BASE) ** (-ks * (1.0 + hoelder))
        self.period = 2.0 * math.pi

    def radius(self, t):
        t = np.asarray(t, dtype=float)
        osc = np.cos(np.multiply.outer(t, self.freqs)) @ self.coefs
        return self.base_radius * (1.0 + self.amplitude * osc)

    def dradius(self, t):
        t = np.asarray(t, dtype=float)
        osc = np.sin(np.multiply.outer(t, self.freqs)) @ (self.coefs * self.freqs)
        return -self.base_radius * self.amplitude * osc

    def point(self, t):
        t = np.asarray(t, dtype=float)
        r = self.radius(t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        r = self.radius(t)
        dr = self.dradius(t)
        ct, st = np.cos(t), np.sin(t)
        return np.stack([dr * ct - r * st, dr * st + r * ct], axis=-1)

    def normal(self, t):
        return _unit(_rot_cw(self.velocity(t)))


class _RoundedPolygonCurve:
    """Convex polygon with every corner replaced by a tangent circular arc.

    Unit-speed parameterization by arclength; pieces alternate
    arc(corner i), segment(edge i).  The boundary is C^1 by construction
    (tangents match at the junctions), with curvature jumping between 0
    and 1/r.
    """

    def __init__(self, vertices: np.ndarray, rounding: float):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise DomainError("polygon needs at least 3 planar vertices")
        # enforce CCW ordering
        area2 = _polygon_area2(verts)
        if abs(area2) < 1e-14:
            raise DomainError("degenerate polygon")
        if area2 < 0:
            verts = verts[::-1].copy()
        self.vertices = verts
        self.rounding = rounding

        m = len(verts)
        edge_vec = np.roll(verts, -1, axis=0) - verts
        edge_len = np.linalg.norm(edge_vec, axis=1)
        if np.any(edge_len < 1e-14):
            raise DomainError("polygon has a zero-length edge")
        if not 0.0 < rounding < 0.5 * edge_len.min():
            raise DomainError(
                "rounding radius must be positive and less than half the shortest edge "
                f"(got r={rounding}, shortest edge {edge_len.min()})"
            )
        u = edge_vec / edge_len[:, None]          # unit edge directions
        n = _rot_cw(u)                            # outward edge normals
        # exterior turning angle at each corner (from edge i-1 into edge i)
        u_prev = np.roll(u, 1, axis=0)
        cross = u_prev[:, 0] * u[:, 1] - u_prev[:, 1] * u[:, 0]
        dot = np.einsum("ij,ij->i", u_prev, u)
        turn = np.arctan2(cross, dot)
        if np.any(turn <= 1e-12):
            raise DomainError("polygon must be strictly convex")
        self.edge_dir = u
        self.edge_normal = n
        self.turn = turn

        # arc centers: intersection of the two inward-offset edge lines
        n_prev = np.roll(n, 1, axis=0)
        d = np.einsum("ij,ij->i", n, verts)       # edge line offsets n.x = d
        d_prev = np.roll(d, 1)
        centers = np.empty_like(verts)
        for i in range(m):
            A = np.array([n_prev[i], n[i]])
            rhs = np.array([d_prev[i] - rounding, d[i] - rounding])
            centers[i] = np.linalg.solve(A, rhs)
        self.centers = centers

        # tangency points: arc i ends on edge i at B_i, next arc starts at A_{i+1}
        B = centers + rounding * n                # start of straight run on edge i
        A = np.roll(centers, -1, axis=0) + rounding * n
        seg_len = np.einsum("ij,ij->i", A - B, u)
        if np.any(seg_len < -1e-12):
            raise DomainError("rounding radius too large: tangency points cross on an edge")
        seg_len = np.clip(seg_len, 0.0, None)
        self.seg_start = B
        self.seg_len = seg_len
        # angle of the outward radial direction at the start of each arc
        self.arc_start_angle = np.arctan2(n_prev[:, 1], n_prev[:, 0])

        arc_len = rounding * turn
        pieces = np.empty(2 * m)
        pieces[0::2] = arc_len
        pieces[1::2] = seg_len
        self.piece_len = pieces
        self.offsets = np.concatenate([[0.0], np.cumsum(pieces)])
        self.period = float(self.offsets[-1])

    def _locate(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.period)
        idx = np.clip(np.searchsorted(self.offsets, s, side="right") - 1, 0, len(self.piece_len) - 1)
        local = s - self.offsets[idx]
        return idx, local

    def point(self, s):
        idx, local = self._locate(s)
        out = np.empty(idx.shape + (2,))
        arc = idx % 2 == 0
        k = idx // 2
        if np.any(arc):
            ka = k[arc]
            phi = self.arc_start_angle[ka] + local[arc] / self.rounding
            out[arc] = self.centers[ka] + self.rounding * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        if np.any(~arc):
            ks = k[~arc]
            out[~arc] = self.seg_start[ks] + local[~arc, None] * self.edge_dir[ks]
        return out

    def velocity(self, s):
        idx, local = self._locate(s)
        out = np.empty(idx.shape + (2,))
        arc = idx % 2 == 0
        k = idx // 2
        if np.any(arc):
            ka = k[arc]
            phi = self.arc_start_angle[ka] + local[arc] / self.rounding
            out[arc] = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
        if np.any(~arc):
            out[~arc] = self.edge_dir[k[~arc]]
        return out

    def normal(self, s):
        return _rot_cw(self.velocity(s))


def _polygon_area2(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _point_segment_distance(pts, a, b):
    """Distance from points (n,2) to segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


@dataclass(frozen=True)
class DomainSpec:
    """Declarative description of a test domain.

    ``params`` is a flat tuple of reals whose meaning depends on ``kind``:

    - interval: (half_length,)
    - disk: (radius,)
    - ellipse: (a, b)
    - square: (side,)
    - smoothed_polygon: (x0, y0, ..., x_{m-1}, y_{m-1}, rounding)
    - rough_disk: (base_radius, amplitude, hoelder_exponent)
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _ALL_KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        self._validate()

    # -- constructors --------------------------------------------------
    @staticmethod
    def interval(half_length: float) -> "DomainSpec":
        return DomainSpec("interval", (float(half_length),))

    @staticmethod
    def disk(radius: float) -> "DomainSpec":
        return DomainSpec("disk", (float(radius),))

    @staticmethod
    def ellipse(a: float, b: float) -> "DomainSpec":
        return DomainSpec("ellipse", (float(a), float(b)))

    @staticmethod
    def square(side: float) -> "DomainSpec":
        return DomainSpec("square", (float(side),))

    @staticmethod
    def smoothed_polygon(vertices, rounding: float) -> "DomainSpec":
        flat = tuple(float(c) for xy in vertices for c in xy)
        return DomainSpec("smoothed_polygon", flat + (float(rounding),))

    @staticmethod
    def smoothed_square(side: float, rounding: float) -> "DomainSpec":
        s = float(side) / 2.0
        return DomainSpec.smoothed_polygon([(-s, -s), (s, -s), (s, s), (-s, s)], rounding)

    @staticmethod
    def rough_disk(base_radius: float, amplitude: float, hoelder: float) -> "DomainSpec":
        return DomainSpec("rough_disk", (float(base_radius), float(amplitude), float(hoelder)))

    # -- validation ----------------------------------------------------
    def _validate(self):
        p = self.params
        if self.kind == "interval":
            if len(p) != 1 or p[0] <= 0:
                raise DomainError("interval needs a positive half-length")
        elif self.kind == "disk":
            if len(p) != 1 or p[0] <= 0:
                raise DomainError("disk needs a positive radius")
        elif self.kind == "ellipse":
            if len(p) != 2 or min(p) <= 0:
                raise DomainError("ellipse needs positive semi-axes")
        elif self.kind == "square":
            if len(p) != 1 or p[0] <= 0:
                raise DomainError("square needs a positive side")
        elif self.kind == "smoothed_polygon":
            if len(p) < 7 or len(p) % 2 == 0:
                raise DomainError("smoothed_polygon needs >=3 vertices plus a rounding radius")
            _RoundedPolygonCurve(self._polygon_vertices(), p[-1])  # full validation
        elif self.kind == "rough_disk":
            if len(p) != 3:
                raise DomainError("rough_disk needs (radius, amplitude, hoelder)")
            radius, amplitude, hoelder = p
            if radius <= 0 or amplitude < 0:
                raise DomainError("rough_disk needs positive radius and nonnegative amplitude")
            if not 0.0 < hoelder < 1.0:
                raise DomainError("rough_disk Hoelder exponent must be in (0, 1)")
            curve = _RoughDiskCurve(radius, amplitude, hoelder)
            t = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
            if curve.radius(t).min() <= 0.05 * radius:
                raise DomainError("rough_disk amplitude too large: boundary radius dips to zero")

    def _polygon_vertices(self) -> np.ndarray:
        return np.asarray(self.params[:-1], dtype=float).reshape(-1, 2)

    # -- basic geometry --------------------------------------------------
    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def is_smooth(self) -> bool:
        """True when the boundary is C^1 (everything except the square)."""
        return self.kind in _SMOOTH_KINDS

    @property
    def is_polygonal(self) -> bool:
        """True when the mesh represents the boundary exactly (no chord error)."""
        return self.kind in ("interval", "square")

    @cached_property
    def curve(self):
        """Analytic boundary curve for smooth 2D kinds."""
        k, p = self.kind, self.params
        if k == "disk":
            return _EllipseCurve(p[0], p[0])
        if k == "ellipse":
            return _EllipseCurve(p[0], p[1])
        if k == "rough_disk":
            return _RoughDiskCurve(*p)
        if k == "smoothed_polygon":
            return _RoundedPolygonCurve(self._polygon_vertices(), p[-1])
        raise DomainError(f"domain kind {k!r} has no smooth boundary curve")

    def area(self) -> float:
        """Measure of the domain (length in 1D)."""
        k, p = self.kind, self.params
        if k == "interval":
            return 2.0 * p[0]
        if k == "disk":
            return math.pi * p[0] ** 2
        if k == "ellipse":
            return math.pi * p[0] * p[1]
        if k == "square":
            return p[0] ** 2
        if k == "smoothed_polygon":
            curve = self.curve
            poly = 0.5 * abs(_polygon_area2(curve.vertices))
            r = curve.rounding
            cut = np.sum(r * r * (np.tan(curve.turn / 2.0) - curve.turn / 2.0))
            return float(poly - cut)
        if k == "rough_disk":
            # area of a polar graph, spectrally accurate trapezoid rule
            t = np.linspace(0.0, 2.0 * math.pi, 1 << 14, endpoint=False)
            rho = self.curve.radius(t)
            return float(0.5 * np.mean(rho * rho) * 2.0 * math.pi)
        raise AssertionError(k)

    def boundary_measure(self) -> float:
        """Perimeter in 2D; number of endpoints (2) in 1D."""
        k, p = self.kind, self.params
        if k == "interval":
            return 2.0
        if k == "disk":
            return 2.0 * math.pi * p[0]
        if k == "square":
            return 4.0 * p[0]
        if k == "smoothed_polygon":
            return self.curve.period
        # ellipse / rough disk: integrate the speed
        t = np.linspace(0.0, 2.0 * math.pi, 1 << 14, endpoint=False)
        speed = np.linalg.norm(self.curve.velocity(t), axis=-1)
        return float(np.mean(speed) * 2.0 * math.pi)

    def contains(self, pts) -> np.ndarray:
        """Vectorized strict inside test for points of shape (n, dim)."""
        pts = np.asarray(pts, dtype=float)
        k, p = self.kind, self.params
        if k == "interval":
            x = pts[:, 0] if pts.ndim == 2 else pts
            return np.abs(x) < p[0]
        if k == "disk":
            return np.einsum("ij,ij->i", pts, pts) < p[0] ** 2
        if k == "ellipse":
            return (pts[:, 0] / p[0]) ** 2 + (pts[:, 1] / p[1]) ** 2 < 1.0
        if k == "square":
            return np.max(np.abs(pts), axis=1) < 0.5 * p[0]
        if k == "rough_disk":
            theta = np.arctan2(pts[:, 1], pts[:, 0])
            return np.linalg.norm(pts, axis=1) < self.curve.radius(theta)
        if k == "smoothed_polygon":
            curve = self.curve
            centers = curve.centers
            d = np.einsum("ij,ij->i", curve.edge_normal, curve.vertices) - curve.rounding
            signed = pts @ curve.edge_normal.T - d  # (n, m)
            inside_core = np.all(signed <= 0.0, axis=1)
            dist = np.full(len(pts), np.inf)
            m = len(centers)
            for i in range(m):
                a, b = centers[i], centers[(i + 1) % m]
                dist = np.minimum(dist, _point_segment_distance(pts, a, b))
            return inside_core | (dist < curve.rounding)
        raise AssertionError(k)

    # -- boundary discretization ----------------------------------------
    def boundary_loop(self, h: float) -> np.ndarray:
        """Ordered CCW ring of points on the analytic boundary, spacing about h.

        Polygon corners are always included exactly; smooth boundaries are
        sampled uniformly in arclength.
        """
        if self.dim != 2:
            raise DomainError("boundary_loop is a 2D operation")
        if self.kind == "square":
            s = self.params[0]
            half = 0.5 * s
            corners = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
            n_per = max(1, int(math.ceil(s / h)))
            pieces = []
            for i in range(4):
                a, b = corners[i], corners[(i + 1) % 4]
                frac = np.arange(n_per) / n_per
                pieces.append(a + frac[:, None] * (b - a))
            return np.vstack(pieces)
        curve = self.curve
        n = max(8, int(math.ceil(self.boundary_measure() / h)))
        params = self.uniform_boundary_params(n)
        return curve.point(params)

    def uniform_boundary_params(self, n: int) -> np.ndarray:
        """n curve parameters equally spaced in arclength (smooth kinds)."""
        curve = self.curve
        if isinstance(curve, _RoundedPolygonCurve):
            return np.arange(n) * (curve.period / n)  # already unit speed
        dense = np.linspace(0.0, curve.period, 1 << 13 | 1)
        speed = np.linalg.norm(curve.velocity(dense), axis=-1)
        arc = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(dense))])
        targets = np.arange(n) * (arc[-1] / n)
        return np.interp(targets, arc, dense)

    def scale(self) -> float:
        """Characteristic length (used for tolerances)."""
        k, p = self.kind, self.params
        if k == "interval":
            return p[0]
        if k in ("disk", "rough_disk"):
            return p[0]
        if k == "ellipse":
            return max(p)
        if k == "square":
            return p[0]
        verts = self._polygon_vertices()
        return float(np.max(np.linalg.norm(verts, axis=1)))

    def describe(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @staticmethod
    def from_description(rec: dict) -> "DomainSpec":
        return DomainSpec(rec["kind"], tuple(float(v) for v in rec["params"]))
