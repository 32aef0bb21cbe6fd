"""Coupling sweeps, ratio-limit diagnostics, and record emission.

A sweep solves the eigenvalue problem along an ascending alpha grid on one
mesh, attaches the per-alpha certificate bracket, and produces flat records
suitable for CSV/JSON emission.  The ratio lambda / alpha^{p/(p-1)} is the
quantity whose limit the certificates pin down.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..bounds import (
    BoundsCertificate,
    ResolutionError,
    default_mesh_tolerance,
    sandwich_check,
)
from ..eigensolver import SolverOptions, continuation_sweep, solve_lambda
from ..geometry.domains import DomainSpec
from ..geometry.extension import (
    NormalExtension,
    chart_blend_certified,
    extend_normal_closed_form,
    square_normal_extension,
)
from ..geometry.mesh import Mesh, build_mesh

__all__ = [
    "SweepRecord",
    "RunConfig",
    "FitResult",
    "CornerVerdict",
    "alpha_sweep",
    "fit_ratio",
    "corner_demo",
    "emit",
    "records_from_csv",
    "records_from_json",
    "extension_for",
    "SWEEP_MAX_BETA_H",
]

SWEEP_MAX_BETA_H = 0.2
CSV_COLUMNS = ("alpha", "lambda", "ratio", "lower", "upper",
               "iterations", "converged", "mesh_h")

_extension_cache: dict = {}


@dataclass(frozen=True)
class SweepRecord:
    alpha: float
    lam: float
    ratio: float
    lower: float
    upper: float
    iterations: int
    converged: bool
    mesh_h: float

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda": self.lam,
            "ratio": self.ratio,
            "lower": self.lower,
            "upper": self.upper,
            "iterations": self.iterations,
            "converged": self.converged,
            "mesh_h": self.mesh_h,
        }

    @staticmethod
    def from_dict(rec: dict) -> "SweepRecord":
        return SweepRecord(float(rec["alpha"]), float(rec["lambda"]), float(rec["ratio"]),
                           float(rec["lower"]), float(rec["upper"]), int(rec["iterations"]),
                           bool(rec["converged"]), float(rec["mesh_h"]))


@dataclass
class RunConfig:
    """One sweep: domain, exponent, alpha grid, mesh size, solver options."""

    domain: DomainSpec
    p: float
    alphas: tuple
    h: float
    options: SolverOptions = field(default_factory=SolverOptions)
    certificate_source: str = "auto"   # auto | closed_form | charts
    sigma: float | None = None
    warm: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 1.1 <= self.p <= 10.0:
            raise ValueError(
                f"exponent p={self.p} outside the calibrated window [1.1, 10]")
        self.alphas = tuple(float(a) for a in self.alphas)
        if not self.alphas or min(self.alphas) <= 0:
            raise ValueError("alpha grid must be nonempty and positive")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ValueError("alpha grid must be strictly ascending")
        beta_max = max(self.alphas) ** (1.0 / (self.p - 1.0))
        if beta_max * self.h > SWEEP_MAX_BETA_H:
            raise ResolutionError(
                f"beta*h = {beta_max * self.h:.3g} exceeds {SWEEP_MAX_BETA_H}: "
                "the boundary layer is unresolved; refine h or lower alpha")


def extension_for(spec: DomainSpec, source: str = "auto",
                  sigma: float | None = None) -> NormalExtension:
    """Certificate extension for a domain, cached per (spec, source, sigma)."""
    key = (spec, source, sigma)
    ext = _extension_cache.get(key)
    if ext is not None:
        return ext
    if source not in ("auto", "closed_form", "charts"):
        raise ValueError(f"unknown certificate source {source!r}")
    if source == "charts":
        ext = chart_blend_certified(spec, sigma)
    elif spec.kind in ("interval", "disk", "ellipse"):
        ext = extend_normal_closed_form(spec)
    elif spec.kind == "square":
        ext = square_normal_extension(spec)
    elif source == "closed_form":
        raise ValueError(f"no closed-form extension for kind {spec.kind!r}")
    else:
        ext = chart_blend_certified(spec, sigma)
    _extension_cache[key] = ext
    return ext


def alpha_sweep(config: RunConfig, mesh: Mesh | None = None) -> list:
    """Run the sweep and attach the certificate bracket to every record."""
    if mesh is None:
        mesh = build_mesh(config.domain, config.h)
    ext = extension_for(config.domain, config.certificate_source, config.sigma)

    if config.warm:
        results = continuation_sweep(mesh, config.p, config.alphas, config.options)
    else:
        results = [solve_lambda(mesh, config.p, a, config.options) for a in config.alphas]

    records = []
    expo = config.p / (config.p - 1.0)
    for res in results:
        cert = BoundsCertificate.from_extension(ext, config.p, res.alpha)
        scale = res.alpha ** expo
        ratio = res.lam / scale if scale > 0 else math.nan
        records.append(SweepRecord(res.alpha, res.lam, ratio, cert.lower, cert.upper,
                                   res.iterations, res.converged, mesh.h))
    return records


@dataclass(frozen=True)
class FitResult:
    limit: float        # fitted A, the candidate for 1 - p
    coefficient: float  # fitted B
    exponent: float     # fitted theta
    sse: float


def fit_ratio(records, p: float) -> FitResult:
    """Least-squares fit ratio(alpha) = A + B alpha^{-theta} over a theta grid.

    theta is chosen from a fixed grid that includes 1/p and the common
    correction orders; A is the asymptotic limit estimate (expected 1 - p
    on smooth domains, strictly below on domains with corners).
    """
    recs = [r for r in records if r.converged and math.isfinite(r.ratio)]
    if len(recs) < 3:
        raise ValueError(f"need at least 3 converged records to fit (got {len(recs)})")
    alphas = np.array([r.alpha for r in recs])
    ratios = np.array([r.ratio for r in recs])
    thetas = sorted({1.0 / p, 0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75, 1.0, 1.25, 1.5, 2.0})
    best = None
    for theta in thetas:
        X = np.stack([np.ones_like(alphas), alphas ** (-theta)], axis=1)
        coef, *_ = np.linalg.lstsq(X, ratios, rcond=None)
        sse = float(np.sum((X @ coef - ratios) ** 2))
        if best is None or sse < best.sse:
            best = FitResult(float(coef[0]), float(coef[1]), float(theta), sse)
    return best


@dataclass(frozen=True)
class CornerVerdict:
    failure_demonstrated: bool
    fitted_square: float
    fitted_smoothed: float
    margin: float


def corner_demo(side: float, p: float, alphas, h: float,
                rounding: float | None = None,
                options: SolverOptions | None = None) -> tuple:
    """Square vs rounded square: corners push the ratio limit strictly below 1-p.

    Returns (square_records, smoothed_records, verdict).  The verdict only
    asserts separation from the smooth limit by the fixed margin; no
    literature value for the corner constant is assumed.
    """
    spec_square = DomainSpec.square(side)
    rounding = rounding if rounding is not None else 0.2 * side
    spec_smooth = DomainSpec.smoothed_square(side, rounding)
    opts = options or SolverOptions(gtol=1e-5)
    margin = 0.5

    cfg_square = RunConfig(spec_square, p, tuple(alphas), h, opts)
    square_records = alpha_sweep(cfg_square)
    # the rounded square has no corner layer, so it tolerates a coarser mesh
    cfg_smooth = RunConfig(spec_smooth, p, tuple(alphas), h * 2 if _beta_ok(p, alphas, h * 2)
                           else h, opts, certificate_source="charts")
    smoothed_records = alpha_sweep(cfg_smooth)

    fit_square = fit_ratio(square_records, p)
    fit_smooth = fit_ratio(smoothed_records, p)
    demonstrated = fit_square.limit <= (1.0 - p) - margin
    verdict = CornerVerdict(demonstrated, fit_square.limit, fit_smooth.limit, margin)
    return square_records, smoothed_records, verdict


def _beta_ok(p, alphas, h):
    return max(alphas) ** (1.0 / (p - 1.0)) * h <= SWEEP_MAX_BETA_H


# -- emission ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit(records, fmt: str, path) -> None:
    """Write records as CSV (fixed column order) or JSON (array of objects)."""
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in records:
            lines.append(",".join([
                _fmt(r.alpha), _fmt(r.lam), _fmt(r.ratio), _fmt(r.lower), _fmt(r.upper),
                str(r.iterations), "true" if r.converged else "false", _fmt(r.mesh_h),
            ]))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps([r.to_dict() for r in records], indent=2) + "\n"
    else:
        raise ValueError(f"unknown emission format {fmt!r}")
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {fmt} records to {path}: {exc}") from exc


def records_from_csv(path) -> list:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rec = dict(zip(CSV_COLUMNS, parts))
        out.append(SweepRecord(
            float(rec["alpha"]), float(rec["lambda"]), float(rec["ratio"]),
            float(rec["lower"]), float(rec["upper"]), int(rec["iterations"]),
            rec["converged"] == "true", float(rec["mesh_h"])))
    return out


def records_from_json(path) -> list:
    with open(path) as fh:
        data = json.load(fh)
    return [SweepRecord.from_dict(rec) for rec in data]
