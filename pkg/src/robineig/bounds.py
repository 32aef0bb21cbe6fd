"""Explicit two-sided eigenvalue bounds and the inequalities behind them.

The upper bound is the value (1-p) alpha^{p/(p-1)} reached by the
exponential trial field; the lower bound combines the divergence identity
for a mollified normal extension with a Young-inequality split, and for
the optimized delta it reads

    (1-p) ((1+eps)/(1-eps))^{p/(p-1)} alpha^{p/(p-1)} - c alpha / (1+eps).

Both reduce to the same value at eps = 0, c = 0, so the pair brackets the
eigenvalue and squeezes at rate c * alpha^{1 - p/(p-1)} as alpha grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functionals import (
    ScalarField,
    boundary_mass,
    dirichlet_energy,
    rayleigh_quotient,
    volume_mass,
)
from .geometry.extension import NormalExtension
from .geometry.mesh import Mesh
from .eigensolver import SolveResult, exponential_trial_coeffs

__all__ = [
    "ResolutionError",
    "CertificateError",
    "BoundsCertificate",
    "upper_bound_value",
    "lower_bound_value",
    "delta_star",
    "trial_field",
    "trial_quotient",
    "young_split",
    "TraceCheck",
    "trace_inequality_residual",
    "geometric_tolerance",
    "SandwichVerdict",
    "sandwich_check",
    "default_mesh_tolerance",
]

# relative energy error of the P1-interpolated boundary-layer trial scales
# like beta*h; this cushion converts it into the discretization allowance
TRIAL_TOL_FACTOR = 5.0
TRIAL_MAX_BETA_H = 0.5
_CURVED_GEOM_FACTOR = 10.0


class ResolutionError(ValueError):
    """The mesh cannot resolve the boundary layer of the trial field."""


class CertificateError(ValueError):
    """Certificate constants are outside their admissible range."""


def _exponent(p: float) -> float:
    return p / (p - 1.0)


def upper_bound_value(p: float, alpha: float) -> float:
    """(1-p) * alpha^{p/(p-1)}; zero at alpha = 0."""
    _check_p_alpha(p, alpha)
    if alpha == 0.0:
        return 0.0
    return (1.0 - p) * alpha ** _exponent(p)


def lower_bound_value(p: float, alpha: float, eps: float, c: float) -> float:
    """Certified lower bound from a mollified extension with constants (eps, c)."""
    _check_p_alpha(p, alpha)
    _check_certificate(eps, c)
    if alpha == 0.0:
        return 0.0
    q = (1.0 + eps) / (1.0 - eps)
    return (1.0 - p) * q ** _exponent(p) * alpha ** _exponent(p) - c * alpha / (1.0 + eps)


def delta_star(p: float, alpha: float, eps: float) -> float:
    """The Young-split weight that optimizes the lower bound."""
    _check_p_alpha(p, alpha)
    if not 0.0 <= eps < 1.0:
        raise CertificateError(f"epsilon must lie in [0, 1) (got {eps})")
    if alpha == 0.0:
        return math.inf
    return ((1.0 + eps) / (1.0 - eps) * alpha) ** (-1.0 / p)


def _check_p_alpha(p: float, alpha: float):
    if not p > 1.0:
        raise ValueError(f"exponent p must exceed 1 (got {p})")
    if alpha < 0:
        raise ValueError(f"coupling alpha must be nonnegative (got {alpha})")


def _check_certificate(eps: float, c: float):
    if not 0.0 <= eps < 1.0:
        raise CertificateError(f"epsilon must lie in [0, 1) (got {eps})")
    if not (c >= 0.0 and math.isfinite(c)):
        raise CertificateError(f"divergence bound c must be finite and nonnegative (got {c})")


@dataclass(frozen=True)
class BoundsCertificate:
    """Frozen record of the two bounds for one (p, alpha) with provenance."""

    p: float
    alpha: float
    epsilon: float
    c: float
    provenance: str = "closed_form"
    safety_factor: float = 1.0

    def __post_init__(self):
        _check_p_alpha(self.p, self.alpha)
        _check_certificate(self.epsilon, self.c)

    @property
    def beta(self) -> float:
        if self.alpha == 0.0:
            return 0.0
        return self.alpha ** (1.0 / (self.p - 1.0))

    @property
    def delta_star(self) -> float:
        return delta_star(self.p, self.alpha, self.epsilon)

    @property
    def upper(self) -> float:
        return upper_bound_value(self.p, self.alpha)

    @property
    def lower(self) -> float:
        return lower_bound_value(self.p, self.alpha, self.epsilon, self.c)

    @staticmethod
    def from_extension(ext: NormalExtension, p: float, alpha: float) -> "BoundsCertificate":
        if not math.isfinite(ext.c):
            raise CertificateError(
                "extension has no finite divergence bound; mollify it first")
        return BoundsCertificate(p, alpha, ext.epsilon, ext.c,
                                 ext.provenance, ext.safety_factor)

    def to_record(self) -> dict:
        return {
            "p": self.p,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "c": self.c,
            "delta_star": self.delta_star,
            "upper": self.upper,
            "lower": self.lower,
            "provenance": self.provenance,
            "safety_factor": self.safety_factor,
        }


# -- the trial field ------------------------------------------------------------

def trial_field(mesh: Mesh, p: float, alpha: float,
                direction: np.ndarray | None = None) -> ScalarField:
    return ScalarField(mesh, exponential_trial_coeffs(mesh, p, alpha, direction))


def trial_quotient(mesh: Mesh, p: float, alpha: float,
                   direction: np.ndarray | None = None) -> float:
    """Quotient of the interpolated exponential trial field.

    Refuses to evaluate when beta*h exceeds 0.5: the boundary layer would be
    unresolved and the value meaningless.
    """
    _check_p_alpha(p, alpha)
    beta = alpha ** (1.0 / (p - 1.0)) if alpha > 0 else 0.0
    if beta * mesh.h > TRIAL_MAX_BETA_H:
        raise ResolutionError(
            f"beta*h = {beta * mesh.h:.3g} > {TRIAL_MAX_BETA_H}: boundary layer unresolved")
    return rayleigh_quotient(trial_field(mesh, p, alpha, direction), p, alpha)


def trial_tolerance(mesh: Mesh, p: float, alpha: float) -> float:
    """Discretization allowance for the trial quotient: 5 * beta*h * |upper|."""
    beta = alpha ** (1.0 / (p - 1.0)) if alpha > 0 else 0.0
    return TRIAL_TOL_FACTOR * beta * mesh.h * abs(upper_bound_value(p, alpha))


# -- Young split ------------------------------------------------------------------

def young_split(a, b, p, delta) -> tuple:
    """The two right-hand terms of a^{p-1} b <= (p-1)/p d^{-p/(p-1)} a^p + 1/p d^p b^p.

    Accepts scalars or broadcastable arrays.
    """
    a, b, p, delta = (np.asarray(v, dtype=float) for v in (a, b, p, delta))
    if not np.all(delta > 0):
        raise ValueError("delta must be positive")
    if not np.all(p > 1.0):
        raise ValueError("p must exceed 1")
    t1 = (p - 1.0) / p * delta ** (-p / (p - 1.0)) * a ** p
    t2 = delta ** p / p * b ** p
    if t1.ndim == 0:
        return float(t1), float(t2)
    return t1, t2


# -- trace inequality ---------------------------------------------------------------

@dataclass(frozen=True)
class TraceCheck:
    residual: float
    tol_geom: float
    scale: float

    @property
    def satisfied(self) -> bool:
        return self.residual >= -self.tol_geom


def geometric_tolerance(mesh: Mesh) -> float:
    """Relative chord/quadrature allowance for boundary-integral inequalities."""
    spec = mesh.domain
    if spec is None or spec.is_polygonal:
        return 1e-8
    rel = mesh.h / spec.scale()
    return 1e-8 + _CURVED_GEOM_FACTOR * rel * rel


def trace_inequality_residual(u: ScalarField, ext: NormalExtension, p: float,
                              delta: float) -> TraceCheck:
    """RHS - LHS of the certified trace inequality for the given field.

    (1-eps) B <= (1+eps) delta^p D + (c + (1+eps)(p-1) delta^{-p/(p-1)}) M
    must hold for every field up to the geometric tolerance reported in the
    result (chord and quadrature error on curved meshes).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    _check_certificate(ext.epsilon, ext.c)
    eps, c = ext.epsilon, ext.c
    B = boundary_mass(u, p)
    D = dirichlet_energy(u, p)
    M = volume_mass(u, p)
    lhs = (1.0 - eps) * B
    rhs = (1.0 + eps) * delta ** p * D + (c + (1.0 + eps) * (p - 1.0) * delta ** (-_exponent(p))) * M
    scale = lhs + rhs
    tol = geometric_tolerance(u.mesh) * scale
    return TraceCheck(rhs - lhs, tol, scale)


# -- sandwich ----------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichVerdict:
    holds: bool
    lower_margin: float
    upper_margin: float
    tol_h: float
    lam: float
    lower: float
    upper: float

    def describe(self) -> dict:
        return {
            "holds": self.holds,
            "lambda": self.lam,
            "lower": self.lower,
            "upper": self.upper,
            "lower_margin": self.lower_margin,
            "upper_margin": self.upper_margin,
            "tol_h": self.tol_h,
        }


def default_mesh_tolerance(mesh: Mesh, cert: BoundsCertificate) -> float:
    """Sandwich allowance: trial discretization error plus geometric slack."""
    geom = geometric_tolerance(mesh) * max(1.0, abs(cert.upper))
    return TRIAL_TOL_FACTOR * cert.beta * mesh.h * abs(cert.upper) + geom


def sandwich_check(result: SolveResult, cert: BoundsCertificate,
                   tol_h: float) -> SandwichVerdict:
    """Bracket test: lower - tol_h <= lambda <= upper + tol_h, with margins."""
    if not result.converged:
        raise ValueError("sandwich check needs a converged solve")
    lam = result.lam
    lower_margin = lam - cert.lower
    upper_margin = cert.upper - lam
    holds = (lam >= cert.lower - tol_h) and (lam <= cert.upper + tol_h)
    return SandwichVerdict(holds, lower_margin, upper_margin, tol_h,
                           lam, cert.lower, cert.upper)
