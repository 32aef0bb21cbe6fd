"""Self-contained property suites behind the `check` CLI subcommand.

Each suite returns (passed, details); the CLI maps that to an exit code.
The random suites draw from a seeded generator so reruns are reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from ..bounds import trace_inequality_residual
from ..eigensolver import SolverOptions, interval_p2_oracle, solve_lambda
from ..functionals import (
    ScalarField,
    divergence_identity_residual,
    rayleigh_gradient,
    rayleigh_quotient,
    volume_mass,
)
from ..geometry.domains import DomainSpec
from ..geometry.extension import extend_normal_closed_form, square_normal_extension
from ..geometry.mesh import build_mesh

__all__ = ["gradient_suite", "trace_suite", "divergence_suite", "oracle_suite", "SUITES"]

GRADIENT_CONFIGS = [(p, a) for p in (1.5, 2.0, 3.0) for a in (0.5, 4.0)]


def finite_difference_gradient(u: ScalarField, p: float, alpha: float,
                               step: float = 1e-6) -> np.ndarray:
    mesh = u.mesh
    base = u.coeffs
    out = np.empty_like(base)
    for i in range(len(base)):
        up = base.copy(); up[i] += step
        dn = base.copy(); dn[i] -= step
        out[i] = (rayleigh_quotient(ScalarField(mesh, up), p, alpha)
                  - rayleigh_quotient(ScalarField(mesh, dn), p, alpha)) / (2 * step)
    return out


def compare_gradient(u: ScalarField, p: float, alpha: float,
                     rtol: float = 1e-5, floor: float = 1e-8) -> float:
    """Worst relative mismatch between analytic and central-difference gradients."""
    m = volume_mass(u, p)
    un = ScalarField(u.mesh, u.coeffs / m ** (1.0 / p))
    g = rayleigh_gradient(un, p, alpha)
    fd = finite_difference_gradient(un, p, alpha)
    mask = np.abs(g) > floor
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(g[mask] - fd[mask]) / np.abs(g[mask])))


def gradient_suite(seed: int = 0, fields_per_config: int = 20) -> tuple:
    """Finite-difference validation of the quotient gradient on two meshes."""
    rng = np.random.default_rng(seed)
    meshes = [build_mesh(DomainSpec.interval(1.0), 0.2),
              build_mesh(DomainSpec.disk(1.0), 0.45)]
    worst = 0.0
    for mesh in meshes:
        for p, alpha in GRADIENT_CONFIGS:
            for _ in range(fields_per_config):
                coeffs = rng.normal(size=mesh.num_vertices) + 0.2
                err = compare_gradient(ScalarField(mesh, coeffs), p, alpha)
                worst = max(worst, err)
    return worst <= 1e-5, {"worst_relative_error": worst}


def trace_suite(seed: int = 0, fields_per_case: int = 100) -> tuple:
    """Certified trace inequality on random fields; zero violations allowed."""
    rng = np.random.default_rng(seed)
    cases = [
        (build_mesh(DomainSpec.disk(1.0), 0.15), extend_normal_closed_form(DomainSpec.disk(1.0))),
        (build_mesh(DomainSpec.square(1.0), 0.15), square_normal_extension(DomainSpec.square(1.0))),
    ]
    violations = 0
    worst = math.inf
    total = 0
    for mesh, ext in cases:
        for p in (1.5, 2.0, 3.0):
            for delta in (0.1, 1.0):
                for _ in range(fields_per_case):
                    u = ScalarField(mesh, rng.normal(size=mesh.num_vertices))
                    chk = trace_inequality_residual(u, ext, p, delta)
                    total += 1
                    worst = min(worst, chk.residual / max(chk.tol_geom, 1e-300))
                    if not chk.satisfied:
                        violations += 1
    return violations == 0, {"cases": total, "violations": violations,
                             "worst_residual_over_tol": worst}


def divergence_suite(base_h: float = 0.2, levels: int = 3) -> tuple:
    """Divergence identity residual must decay with slope >= 0.9 under refinement."""
    spec = DomainSpec.disk(1.0)
    ext = extend_normal_closed_form(spec)
    hs, residuals = [], []
    for k in range(levels):
        h = base_h / 2 ** k
        mesh = build_mesh(spec, h)
        u = ScalarField.from_callable(mesh, lambda x: np.exp(-x[:, 0]))
        residuals.append(divergence_identity_residual(u, ext, 2.0))
        hs.append(mesh.h)
    slope = np.polyfit(np.log(hs), np.log(residuals), 1)[0]
    return slope >= 0.9, {"h": hs, "residuals": residuals, "slope": float(slope)}


def oracle_suite(h: float = 2e-3, rtol: float = 2e-3) -> tuple:
    """1D solves against the exact transcendental eigenvalue."""
    mesh = build_mesh(DomainSpec.interval(1.0), h)
    opts = SolverOptions(gtol=1e-6)
    worst = 0.0
    for alpha in (1.0, 4.0):
        res = solve_lambda(mesh, 2.0, alpha, opts)
        exact = interval_p2_oracle(1.0, alpha)
        worst = max(worst, abs(res.lam - exact) / abs(exact))
        if not res.converged:
            return False, {"error": f"solve at alpha={alpha} did not converge"}
    return worst <= rtol, {"worst_relative_error": worst}


SUITES = {
    "gradient": gradient_suite,
    "trace": trace_suite,
    "divergence": divergence_suite,
    "oracle": oracle_suite,
}
