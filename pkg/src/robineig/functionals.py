"""Rayleigh-quotient integrals and their first variation on P1 fields.

All three integrals (gradient energy, boundary mass, volume mass) are
assembled cell by cell in a fixed order, so repeated evaluations are
bit-reproducible.  Gradients of piecewise-linear fields are cell constants,
which makes the gradient energy exact; |u|^p is integrated with a degree-4
cell rule and a 4-point Gauss rule on boundary facets.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .geometry.mesh import Mesh

__all__ = [
    "ScalarField",
    "FunctionalBreakdown",
    "DegenerateFieldError",
    "dirichlet_energy",
    "boundary_mass",
    "volume_mass",
    "rayleigh_quotient",
    "rayleigh_gradient",
    "evaluate_breakdown",
    "divergence_identity_residual",
]

MASS_FLOOR = 1e-300

# degree-4 rule on the reference triangle (6 points, barycentric)
_TRI_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_TRI_B = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])

# 3-point Gauss on [0,1] (degree 5), for 1D cells
_SEG_X = np.array([0.5 - math.sqrt(3.0 / 5.0) / 2.0, 0.5, 0.5 + math.sqrt(3.0 / 5.0) / 2.0])
_SEG_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

# 4-point Gauss on [0,1], for boundary facets
_G4 = 0.3399810435848563, 0.8611363115940526
_FACET_X = np.array([(1 - _G4[1]) / 2, (1 - _G4[0]) / 2, (1 + _G4[0]) / 2, (1 + _G4[1]) / 2])
_FACET_W = np.array([0.3478548451374538, 0.6521451548625461,
                     0.6521451548625461, 0.3478548451374538]) / 2.0


class DegenerateFieldError(ValueError):
    """The field has (numerically) zero volume mass."""


@dataclass
class ScalarField:
    """Vertex coefficients of a piecewise-linear field on a mesh."""

    mesh: Mesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.num_vertices,):
            raise ValueError(
                f"coefficient count {self.coeffs.shape} does not match "
                f"vertex count {self.mesh.num_vertices}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("field coefficients must be finite")

    @staticmethod
    def from_callable(mesh: Mesh, f) -> "ScalarField":
        return ScalarField(mesh, np.asarray(f(mesh.vertices), dtype=float))

    @staticmethod
    def constant(mesh: Mesh, value: float = 1.0) -> "ScalarField":
        return ScalarField(mesh, np.full(mesh.num_vertices, float(value)))

    def scaled(self, t: float) -> "ScalarField":
        return ScalarField(self.mesh, t * self.coeffs)

    def export_text(self) -> str:
        head = f"# mesh {self.mesh.checksum()} n {len(self.coeffs)}"
        body = "\n".join(f"{c:.17g}" for c in self.coeffs)
        return head + "\n" + body + "\n"

    @staticmethod
    def from_text(mesh: Mesh, text: str) -> "ScalarField":
        lines = text.strip().splitlines()
        head = lines[0].split()
        if head[1] != mesh.checksum():
            raise ValueError("field was exported for a different mesh "
                             f"(checksum {head[1]}, expected {mesh.checksum()})")
        return ScalarField(mesh, np.array([float(x) for x in lines[1:]]))


@dataclass(frozen=True)
class FunctionalBreakdown:
    """The three integrals entering the quotient, at a fixed exponent p."""

    dirichlet: float
    boundary: float
    mass: float
    p: float

    def quotient(self, alpha: float) -> float:
        if self.mass < MASS_FLOOR:
            raise DegenerateFieldError("volume mass is numerically zero")
        return (self.dirichlet - alpha * self.boundary) / self.mass


# -- cached P1 assembly data -------------------------------------------------

def _p1_data(mesh: Mesh) -> dict:
    data = mesh._cache.get("p1")
    if data is not None:
        return data
    v = mesh.vertices
    cells = mesh.cells
    if mesh.dim == 1:
        length = (v[cells[:, 1], 0] - v[cells[:, 0], 0])[:, None]
        grads = np.stack([-1.0 / length, 1.0 / length], axis=1)  # (nc, 2, 1)
        shape = np.stack([1.0 - _SEG_X, _SEG_X], axis=1)          # (nq, 2)
        qpts = (v[cells[:, 0]][:, None, :] * shape[None, :, 0, None]
                + v[cells[:, 1]][:, None, :] * shape[None, :, 1, None])
        qw = _SEG_W
    else:
        a, b, c = v[cells[:, 0]], v[cells[:, 1]], v[cells[:, 2]]
        e1, e2 = b - a, c - a
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        # rows of inv([e1; e2])^T
        g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
        g0 = -(g1 + g2)
        grads = np.stack([g0, g1, g2], axis=1)                    # (nc, 3, 2)
        shape = _TRI_B                                            # (nq, 3)
        qpts = np.einsum("qk,ckd->cqd", shape, v[cells])
        qw = _TRI_W
    # boundary facet quadrature
    bf = mesh.boundary_facets
    if mesh.dim == 1:
        fshape = np.ones((1, 1))
        fq = v[bf[:, 0]][:, None, :]
        fw = np.ones(1)
    else:
        fshape = np.stack([1.0 - _FACET_X, _FACET_X], axis=1)     # (nq, 2)
        fq = np.einsum("qk,fkd->fqd", fshape, v[bf])
        fw = _FACET_W
    data = {"grads": grads, "shape": shape, "qpts": qpts, "qw": qw,
            "fshape": fshape, "fq": fq, "fw": fw}
    mesh._cache["p1"] = data
    return data


def cell_gradients(u: ScalarField) -> np.ndarray:
    """Constant gradient of the P1 field on each cell, shape (nc, dim)."""
    d = _p1_data(u.mesh)
    return np.einsum("ckd,ck->cd", d["grads"], u.coeffs[u.mesh.cells])


# -- the three integrals -----------------------------------------------------

def dirichlet_energy(u: ScalarField, p: float) -> float:
    """Integral of |grad u|^p; exact for P1 since the gradient is cell-constant."""
    _check_p(p)
    g = cell_gradients(u)
    mag = np.sqrt(np.einsum("cd,cd->c", g, g))
    return float(np.dot(mag ** p, u.mesh.cell_measures))


def volume_mass(u: ScalarField, p: float) -> float:
    """Integral of |u|^p over the domain (degree-4 cell quadrature)."""
    _check_p(p)
    d = _p1_data(u.mesh)
    vals = np.einsum("qk,ck->cq", d["shape"], u.coeffs[u.mesh.cells])
    cellint = np.abs(vals) ** p @ d["qw"]
    return float(np.dot(cellint, u.mesh.cell_measures))


def boundary_mass(u: ScalarField, p: float) -> float:
    """Integral of |u|^p over the boundary (4-point Gauss per facet)."""
    _check_p(p)
    d = _p1_data(u.mesh)
    vals = np.einsum("qk,fk->fq", d["fshape"], u.coeffs[u.mesh.boundary_facets])
    facetint = np.abs(vals) ** p @ d["fw"]
    return float(np.dot(facetint, u.mesh.boundary_measures))


def evaluate_breakdown(u: ScalarField, p: float) -> FunctionalBreakdown:
    return FunctionalBreakdown(dirichlet_energy(u, p), boundary_mass(u, p),
                               volume_mass(u, p), p)


def rayleigh_quotient(u: ScalarField, p: float, alpha: float) -> float:
    return evaluate_breakdown(u, p).quotient(alpha)


def _check_p(p: float):
    if not p > 1.0:
        raise ValueError(f"exponent p must exceed 1 (got {p})")


# -- first variation ---------------------------------------------------------

def rayleigh_gradient(u: ScalarField, p: float, alpha: float) -> np.ndarray:
    """Derivative of the quotient with respect to the vertex coefficients.

    For p < 2 the factor |grad u|^{p-2} in the derivative of the gradient
    energy is regularized as (|grad u|^2 + eta^2)^{(p-2)/2} with
    eta = 1e-8 * max|grad u|; energy values are never regularized.
    """
    _check_p(p)
    mesh = u.mesh
    d = _p1_data(mesh)
    cells = mesh.cells
    coeffs = u.coeffs

    M = volume_mass(u, p)
    if M < MASS_FLOOR:
        raise DegenerateFieldError("volume mass is numerically zero")

    g = np.einsum("ckd,ck->cd", d["grads"], coeffs[cells])
    mag2 = np.einsum("cd,cd->c", g, g)
    D = float(np.dot(mag2 ** (p / 2.0), mesh.cell_measures))
    if p < 2.0:
        eta = 1e-8 * math.sqrt(mag2.max()) if mag2.max() > 0 else 0.0
        mag2_reg = mag2 + eta * eta
    else:
        mag2_reg = mag2
    # p * |g|^{p-2} g . dg/du_i, with |g|^{p-2} = (mag2_reg)^{(p-2)/2}
    with np.errstate(divide="ignore"):
        fac = np.where(mag2_reg > 0, mag2_reg ** ((p - 2.0) / 2.0), 0.0)
    coef = (p * fac * mesh.cell_measures)[:, None] * np.einsum("ckd,cd->ck", d["grads"], g)
    dD = np.zeros(mesh.num_vertices)
    np.add.at(dD, cells, coef)

    vals = np.einsum("qk,ck->cq", d["shape"], coeffs[cells])
    # d/du |u|^p = p sign(u) |u|^{p-1}
    dvals = p * np.sign(vals) * np.abs(vals) ** (p - 1.0)
    coefm = np.einsum("cq,qk->ck", dvals * d["qw"][None, :], d["shape"])
    dM = np.zeros(mesh.num_vertices)
    np.add.at(dM, cells, coefm * mesh.cell_measures[:, None])

    bf = mesh.boundary_facets
    fvals = np.einsum("qk,fk->fq", d["fshape"], coeffs[bf])
    B = float(np.dot(np.abs(fvals) ** p @ d["fw"], mesh.boundary_measures))
    dfvals = p * np.sign(fvals) * np.abs(fvals) ** (p - 1.0)
    coefb = np.einsum("fq,qk->fk", dfvals * d["fw"][None, :], d["fshape"])
    dB = np.zeros(mesh.num_vertices)
    np.add.at(dB, bf, coefb * mesh.boundary_measures[:, None])

    R = (D - alpha * B) / M
    return (dD - alpha * dB - R * dM) / M


# -- discrete divergence identity --------------------------------------------

def divergence_identity_residual(u: ScalarField, ext, p: float) -> float:
    """|boundary flux - volume divergence| for the field |u|^p * mu_eps.

    ``ext`` provides ``mu_eps(points)`` and ``div_mu_eps(points)``.  For a
    C^1 field the two sides agree up to quadrature and chord error, which
    vanishes under mesh refinement.
    """
    _check_p(p)
    mesh = u.mesh
    d = _p1_data(mesh)
    coeffs = u.coeffs

    fvals = np.einsum("qk,fk->fq", d["fshape"], coeffs[mesh.boundary_facets])
    fq = d["fq"]
    mu_b = ext.mu_eps(fq.reshape(-1, mesh.dim)).reshape(fq.shape)
    mudotnu = np.einsum("fqd,fd->fq", mu_b, mesh.boundary_normals)
    lhs = float(np.dot((np.abs(fvals) ** p * mudotnu) @ d["fw"], mesh.boundary_measures))

    qpts = d["qpts"]
    flat = qpts.reshape(-1, mesh.dim)
    mu_c = ext.mu_eps(flat).reshape(qpts.shape)
    div_c = ext.div_mu_eps(flat).reshape(qpts.shape[:2])
    vals = np.einsum("qk,ck->cq", d["shape"], coeffs[mesh.cells])
    g = np.einsum("ckd,ck->cd", d["grads"], coeffs[mesh.cells])
    gdotmu = np.einsum("cqd,cd->cq", mu_c, g)
    integrand = (p * np.sign(vals) * np.abs(vals) ** (p - 1.0) * gdotmu
                 + np.abs(vals) ** p * div_c)
    rhs = float(np.dot(integrand @ d["qw"], mesh.cell_measures))
    return abs(lhs - rhs)
