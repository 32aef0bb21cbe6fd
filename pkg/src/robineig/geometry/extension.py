"""Continuous extensions of the outward unit normal, and their mollification.

An extension carries the base field mu (equal to the outward normal on the
boundary, bounded by 1 in the closed domain), a C^1 surrogate mu_eps with
an evaluable divergence, and two measured constants: epsilon bounds the
defect of mu_eps (sup distance to mu, boundary alignment slack), c bounds
|div mu_eps| over the domain.  Both are measured on dense samples and
inflated by a safety factor; they feed the explicit eigenvalue lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charts import CoverageError, PartitionOfUnity, build_charts, smoothstep
from .domains import DomainError, DomainSpec

__all__ = [
    "NormalExtension",
    "CertificateError",
    "extend_normal_closed_form",
    "extend_normal_charts",
    "square_normal_extension",
    "mollify",
    "chart_blend_certified",
]

SAFETY_FACTOR = 1.1
_KERNEL_POINTS = 9


class CertificateError(ValueError):
    """The extension cannot back a usable certificate."""


@dataclass
class NormalExtension:
    """A normal field extension with certified constants.

    provenance is one of 'closed_form', 'chart_blend_unmollified',
    'chart_blend_mollified'; the unmollified stage has c = inf and exists
    only as input to :func:`mollify`.
    """

    spec: DomainSpec
    mu: object
    mu_eps: object
    div_mu_eps: object
    epsilon: float
    c: float
    provenance: str
    safety_factor: float = 1.0
    sigma: float | None = None
    padding: float = math.inf
    meta: dict = field(default_factory=dict)

    def certificate_record(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c": self.c,
            "provenance": self.provenance,
            "safety_factor": self.safety_factor,
            "sigma": self.sigma,
            "domain": self.spec.describe(),
        }


# -- closed forms -------------------------------------------------------------

def extend_normal_closed_form(spec: DomainSpec) -> NormalExtension:
    """Exact smooth extensions for the interval, disk and ellipse.

    These fields are smooth on the whole space, so the mollification is the
    identity: epsilon = 0 and c bounds |div mu| itself (exact for interval
    and disk, sampled with the safety factor for the ellipse).
    """
    kind = spec.kind
    if kind == "interval":
        half = spec.params[0]

        def mu(pts):
            return np.asarray(pts, dtype=float) / half

        def div(pts):
            return np.full(len(pts), 1.0 / half)

        return NormalExtension(spec, mu, mu, div, 0.0, 1.0 / half, "closed_form")

    if kind == "disk":
        radius = spec.params[0]

        def mu(pts):
            return np.asarray(pts, dtype=float) / radius

        def div(pts):
            return np.full(len(pts), 2.0 / radius)

        return NormalExtension(spec, mu, mu, div, 0.0, 2.0 / radius, "closed_form")

    if kind == "ellipse":
        a, b = spec.params
        kappa = a * b

        def _parts(pts):
            pts = np.asarray(pts, dtype=float)
            x, y = pts[:, 0], pts[:, 1]
            V = np.stack([b * x / a, a * y / b], axis=1)
            q = (x / a) ** 2 + (y / b) ** 2
            n2 = np.einsum("ij,ij->i", V, V) + kappa * (1.0 - q)
            return x, y, V, np.sqrt(n2)

        def mu(pts):
            _, _, V, n = _parts(pts)
            return V / n[:, None]

        def div(pts):
            x, y, V, n = _parts(pts)
            trace = b / a + a / b
            vdotgrad = (b * b * (b - a) * x * x / a ** 3
                        + a * a * (a - b) * y * y / b ** 3)
            return trace / n - vdotgrad / n ** 3

        ext = NormalExtension(spec, mu, mu, div, 0.0, 0.0, "closed_form",
                              safety_factor=SAFETY_FACTOR)
        pts = _domain_samples(spec, max(a, b) / 200.0)
        ext.c = SAFETY_FACTOR * float(np.abs(div(pts)).max())
        return ext

    raise DomainError(
        f"no closed-form normal extension for kind {kind!r}; "
        "build charts and use extend_normal_charts")


def square_normal_extension(spec: DomainSpec) -> NormalExtension:
    """Scaled identity field for the square: a valid but non-tight certificate.

    mu = sqrt(2) x / side gives mu . nu = 1/sqrt(2) on every edge and
    |mu| <= 1 up to the corners, so the certificate carries
    epsilon = 1 - 1/sqrt(2); it cannot be improved to epsilon -> 0 because
    the normal jumps at the corners.
    """
    if spec.kind != "square":
        raise DomainError("square_normal_extension only applies to the square")
    side = spec.params[0]
    scale = math.sqrt(2.0) / side

    def mu(pts):
        return scale * np.asarray(pts, dtype=float)

    def div(pts):
        return np.full(len(pts), 2.0 * scale)

    eps = 1.0 - 1.0 / math.sqrt(2.0) + 1e-12
    return NormalExtension(spec, mu, mu, div, eps, 2.0 * scale, "closed_form")


# -- chart blend --------------------------------------------------------------

def extend_normal_charts(pou: PartitionOfUnity) -> NormalExtension:
    """Blend the per-chart normal fields with the partition weights.

    The result equals the outward normal on the boundary and is bounded by
    one on the closed domain; it is merely continuous, so c = inf until
    :func:`mollify` produces the C^1 stage.  Raises CoverageError when a
    boundary sample escapes all chart boxes.
    """
    spec = pou.spec
    boundary = spec.boundary_loop(spec.boundary_measure() / 512.0)
    raw_b = pou.raw_bumps(boundary)
    uncovered = raw_b[:, 1:].sum(axis=1) <= 0.0
    if np.any(uncovered):
        pt = boundary[np.argmax(uncovered)]
        raise CoverageError(f"boundary point {pt} is not covered by any chart")

    min_cover = pou.min_cover()
    if min_cover < 0.05:
        raise CoverageError(
            f"partition of unity nearly vanishes on the domain (min total {min_cover:.3g})")
    floor = min(0.5 * min_cover, 0.25)

    heights = np.array([ch.half_height for ch in pou.charts])
    padding = 0.4 * float(heights.min())

    def mu(pts):
        pts = np.asarray(pts, dtype=float)
        raw = pou.raw_bumps(pts)
        total = raw.sum(axis=1)
        num = np.zeros_like(pts)
        for j, ch in enumerate(pou.charts, start=1):
            active = raw[:, j] > 0.0
            if not active.any():
                continue
            y1, _ = ch.to_local(pts[active])
            num[active] += raw[active, j, None] * ch.boundary_normal(y1)
        envelope = smoothstep(total / floor)
        safe = np.where(total > 0.0, total, 1.0)
        out = envelope[:, None] * num / safe[:, None]
        out[total == 0.0] = 0.0
        return out

    def no_div(pts):
        raise CertificateError("chart blend is only continuous; mollify it first")

    return NormalExtension(pou.spec, mu, mu, no_div, 0.0, math.inf,
                           "chart_blend_unmollified", padding=padding,
                           meta={"num_charts": len(pou.charts), "cover_floor": floor})


# -- mollification ------------------------------------------------------------

def _kernel_1d():
    # C^2 bump (1-t^2)^3 on [-1,1], sampled at tensor midpoints
    t = -1.0 + (np.arange(_KERNEL_POINTS) + 0.5) * (2.0 / _KERNEL_POINTS)
    k = (1.0 - t * t) ** 3
    dk = -6.0 * t * (1.0 - t * t) ** 2
    return t, k, dk


def mollify(ext: NormalExtension, sigma: float) -> NormalExtension:
    """Convolve the base field with a normalized C^1 bump of radius sigma.

    The convolution is a fixed tensor midpoint quadrature; its divergence is
    the matching quadrature against the kernel derivative.   epsilon and c
    are measured on a sample grid of step sigma/4 (plus boundary points) and
    inflated by the safety factor.  Raises CertificateError when the measured
    epsilon reaches 1 (the lower bound needs epsilon < 1) or when the base
    field is not evaluable on the 3*sigma padding.
    """
    if not sigma > 0:
        raise CertificateError("smoothing length sigma must be positive")
    if 3.0 * sigma > ext.padding:
        raise CertificateError(
            f"sigma={sigma} too large: base field only evaluable on a padding of "
            f"{ext.padding:.3g} (need 3*sigma)")
    spec = ext.spec
    dim = spec.dim
    t, k, dk = _kernel_1d()
    if dim == 1:
        offsets = (sigma * t)[:, None]
        norm = k.sum()
        w = k / norm
        dws = [dk / (sigma * norm)]
    else:
        norm = k.sum() ** 2
        zz = np.array([[sigma * ti, sigma * tj] for ti in t for tj in t])
        offsets = zz
        w = np.array([ki * kj for ki in k for kj in k]) / norm
        dwx = np.array([dki * kj for dki in dk for kj in k]) / (sigma * norm)
        dwy = np.array([ki * dkj for ki in k for dkj in dk]) / (sigma * norm)
        dws = [dwx, dwy]

    base_mu = ext.mu

    def mu_eps(pts):
        pts = np.asarray(pts, dtype=float)
        acc = np.zeros_like(pts)
        for wk, z in zip(w, offsets):
            acc += wk * base_mu(pts - z)
        return acc

    def div_mu_eps(pts):
        pts = np.asarray(pts, dtype=float)
        acc = np.zeros(len(pts))
        for idx, z in enumerate(offsets):
            vals = base_mu(pts - z)
            for d in range(dim):
                acc += dws[d][idx] * vals[:, d]
        return acc

    eps_measured, c_measured = _measure_constants(spec, base_mu, mu_eps, div_mu_eps,
                                                  sigma, t, k, dk)
    if eps_measured >= 1.0:
        raise CertificateError(
            f"mollification too coarse: measured epsilon {eps_measured:.3g} >= 1")

    return NormalExtension(spec, base_mu, mu_eps, div_mu_eps, eps_measured,
                           c_measured, _mollified_provenance(ext), SAFETY_FACTOR,
                           sigma, ext.padding,
                           meta={**ext.meta, "sample_step": sigma / 4.0})


def _mollified_provenance(ext: NormalExtension) -> str:
    if ext.provenance == "closed_form":
        return "closed_form"
    return "chart_blend_mollified"


def _measure_constants(spec, base_mu, mu_eps, div_mu_eps, sigma, t, k, dk):
    """Measured (epsilon, c) on a lattice of step 2*sigma/9 plus boundary points.

    The kernel offsets are integer multiples of the lattice step, so the
    convolutions reduce to separable 9-tap stencils over a single evaluation
    of the base field; the sample step 2*sigma/9 is finer than the sigma/4
    target.
    """
    step = 2.0 * sigma / _KERNEL_POINTS
    dim = spec.dim
    norm1 = k.sum()

    if dim == 1:
        half = spec.params[0]
        pad = sigma + step
        xs = np.arange(-half - pad, half + pad + step, step)
        mu_lat = base_mu(xs[:, None])[:, 0]
        smooth = np.convolve(mu_lat, k / norm1, mode="same")
        deriv = np.convolve(mu_lat, dk / (sigma * norm1), mode="same")
        inside = np.abs(xs) < half
        eps = float(np.abs(smooth[inside] - mu_lat[inside]).max())
        bpts = np.array([[-half], [half]])
        eps = max(eps, float(np.abs(mu_eps(bpts) - base_mu(bpts)).max()))
        c = float(np.abs(deriv[inside]).max())
        return SAFETY_FACTOR * eps, SAFETY_FACTOR * c

    from scipy.ndimage import convolve1d

    ring = spec.boundary_loop(spec.boundary_measure() / 512.0)
    lo = ring.min(axis=0) - sigma - step
    hi = ring.max(axis=0) + sigma + step
    this_step = step
    nx = int((hi[0] - lo[0]) / this_step) + 2
    ny = int((hi[1] - lo[1]) / this_step) + 2
    while nx * ny > 1_500_000:
        this_step *= 1.5
        nx = int((hi[0] - lo[0]) / this_step) + 2
        ny = int((hi[1] - lo[1]) / this_step) + 2
    exact_lattice = abs(this_step - step) < 1e-15
    xs = lo[0] + this_step * np.arange(nx)
    ys = lo[1] + this_step * np.arange(ny)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    flat = grid.reshape(-1, 2)
    mu_lat = base_mu(flat).reshape(nx, ny, 2)

    inside = spec.contains(flat).reshape(nx, ny)
    bpts = spec.boundary_loop(spec.boundary_measure() / 1024.0)

    if exact_lattice:
        kw = k / norm1
        smooth = np.stack([
            convolve1d(convolve1d(mu_lat[..., c], kw, axis=0, mode="constant"),
                       kw, axis=1, mode="constant")
            for c in range(2)], axis=-1)
        dscale = dk / (sigma * norm1)
        div_lat = (convolve1d(convolve1d(mu_lat[..., 0], dscale, axis=0, mode="constant"),
                              kw, axis=1, mode="constant")
                   + convolve1d(convolve1d(mu_lat[..., 1], kw, axis=0, mode="constant"),
                                dscale, axis=1, mode="constant"))
        eps = float(np.linalg.norm((smooth - mu_lat)[inside], axis=-1).max())
        c = float(np.abs(div_lat[inside]).max())
    else:
        pts = flat[inside.ravel()]
        eps = float(np.linalg.norm(mu_eps(pts) - base_mu(pts), axis=1).max())
        c = float(np.abs(div_mu_eps(pts)).max())

    eps = max(eps, float(np.linalg.norm(mu_eps(bpts) - base_mu(bpts), axis=1).max()))
    return SAFETY_FACTOR * eps, SAFETY_FACTOR * c


def chart_blend_certified(spec: DomainSpec, sigma: float | None = None,
                          num_charts: int | None = None) -> NormalExtension:
    """Charts -> partition of unity -> blend -> mollified certificate."""
    charts = build_charts(spec, num_charts)
    pou = PartitionOfUnity(spec, charts)
    raw = extend_normal_charts(pou)
    if sigma is None:
        sigma = raw.padding / 3.5
    return mollify(raw, sigma)


def _domain_samples(spec: DomainSpec, step: float, cap: int = 120000) -> np.ndarray:
    """Deterministic grid of interior points at the given step (capped)."""
    if spec.dim == 1:
        half = spec.params[0]
        n = max(4, int(2 * half / step))
        x = np.linspace(-half, half, n + 1)[1:-1]
        return x[:, None]
    ring = spec.boundary_loop(spec.boundary_measure() / 512.0)
    lo, hi = ring.min(axis=0), ring.max(axis=0)
    span = hi - lo
    n = np.maximum(((span / step).astype(int) + 1), 2)
    while int(n[0]) * int(n[1]) > cap:
        step *= 1.5
        n = np.maximum(((span / step).astype(int) + 1), 2)
    xs = np.linspace(lo[0], hi[0], int(n[0]))
    ys = np.linspace(lo[1], hi[1], int(n[1]))
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    return grid[spec.contains(grid)]
