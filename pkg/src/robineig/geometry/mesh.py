"""Simplicial meshes for the domain zoo.

2D meshes are Delaunay triangulations of a boundary ring (vertices placed
exactly on the analytic boundary) plus a hexagonal interior lattice; 1D
meshes are uniform partitions of the interval.  Boundary facets carry the
outward unit normal and the facet measure, so boundary integrals need no
further geometry.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .domains import DomainSpec

__all__ = ["Mesh", "MeshError", "build_mesh"]

# interior lattice points closer than this (times h) to the boundary ring are
# dropped to avoid slivers between the ring and the lattice
_BOUNDARY_CLEARANCE = 0.7


class MeshError(ValueError):
    """Mesh construction failed or a mesh invariant is violated."""


@dataclass
class Mesh:
    """Immutable simplicial mesh with explicit boundary data.

    vertices: (nv, dim); cells: (nc, dim+1) vertex indices;
    boundary_facets: (nb, dim) vertex indices (a single endpoint in 1D);
    boundary_normals: (nb, dim) outward unit normals;
    boundary_measures: (nb,) facet measures (1.0 for 1D endpoints);
    h: measured characteristic size (max edge length).
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    cell_measures: np.ndarray
    boundary_facets: np.ndarray
    boundary_normals: np.ndarray
    boundary_measures: np.ndarray
    h: float
    domain: DomainSpec | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def volume(self) -> float:
        return float(self.cell_measures.sum())

    @property
    def boundary_vertex_indices(self) -> np.ndarray:
        return np.unique(self.boundary_facets.ravel())

    def facet_midpoints(self) -> np.ndarray:
        return self.vertices[self.boundary_facets].mean(axis=1)

    # -- nested refinement ------------------------------------------------
    def refine_midpoint(self) -> "Mesh":
        """Uniform midpoint refinement; the refined P1 space nests the coarse one.

        Boundary midpoints stay on the facet chords on purpose: projecting
        them to the analytic boundary would break nestedness.
        """
        if self.dim == 1:
            v = self.vertices[:, 0]
            cells = self.cells
            mids = 0.5 * (v[cells[:, 0]] + v[cells[:, 1]])
            newv = np.concatenate([v, mids])
            order = np.argsort(newv, kind="stable")
            rank = np.empty_like(order)
            rank[order] = np.arange(len(newv))
            nv = newv[order][:, None]
            n = len(nv) - 1
            newcells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
            meas = np.diff(nv[:, 0])
            bfacets = np.array([[0], [n]])
            bnormals = np.array([[-1.0], [1.0]])
            bmeas = np.array([1.0, 1.0])
            return Mesh(1, nv, newcells, meas, bfacets, bnormals, bmeas,
                        float(meas.max()), self.domain)

        edges = {}
        verts = [self.vertices]
        next_idx = self.num_vertices

        def midpoint(i, j):
            nonlocal next_idx
            key = (i, j) if i < j else (j, i)
            if key not in edges:
                edges[key] = next_idx
                verts.append(0.5 * (self.vertices[i] + self.vertices[j])[None, :])
                next_idx += 1
            return edges[key]

        newcells = np.empty((4 * self.num_cells, 3), dtype=np.int64)
        for c, (a, b, c2) in enumerate(self.cells):
            ab, bc, ca = midpoint(a, b), midpoint(b, c2), midpoint(c2, a)
            newcells[4 * c:4 * c + 4] = [[a, ab, ca], [ab, b, bc], [ca, bc, c2], [ab, bc, ca]]
        newverts = np.vstack(verts)

        nb = len(self.boundary_facets)
        newbf = np.empty((2 * nb, 2), dtype=np.int64)
        newbn = np.repeat(self.boundary_normals, 2, axis=0)
        newbm = np.repeat(self.boundary_measures / 2.0, 2)
        for k, (i, j) in enumerate(self.boundary_facets):
            mid = midpoint(int(i), int(j))
            newbf[2 * k] = [i, mid]
            newbf[2 * k + 1] = [mid, j]

        meas = _triangle_areas(newverts, newcells)
        hmax = _max_edge(newverts, newcells)
        return Mesh(2, newverts, newcells, meas, newbf, newbn, newbm, hmax, self.domain)

    # -- plain text serialization ------------------------------------------
    def export_text(self) -> str:
        """Whitespace separated decimal with 17 significant digits."""
        lines = [f"{self.dim} {self.num_vertices} {self.num_cells} {len(self.boundary_facets)}"]
        for v in self.vertices:
            lines.append(" ".join(f"{x:.17g}" for x in v))
        for c in self.cells:
            lines.append(" ".join(str(int(i)) for i in c))
        for f, n, m in zip(self.boundary_facets, self.boundary_normals, self.boundary_measures):
            idx = " ".join(str(int(i)) for i in f)
            nrm = " ".join(f"{x:.17g}" for x in n)
            lines.append(f"{idx} {nrm} {m:.17g}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "Mesh":
        rows = [r.split() for r in text.strip().splitlines()]
        dim, nv, nc, nb = (int(x) for x in rows[0])
        at = 1
        verts = np.array([[float(x) for x in r] for r in rows[at:at + nv]])
        at += nv
        cells = np.array([[int(x) for x in r] for r in rows[at:at + nc]], dtype=np.int64)
        at += nc
        bf, bn, bm = [], [], []
        for r in rows[at:at + nb]:
            bf.append([int(x) for x in r[:dim]])
            bn.append([float(x) for x in r[dim:2 * dim]])
            bm.append(float(r[2 * dim]))
        bf = np.array(bf, dtype=np.int64)
        bn = np.array(bn)
        bm = np.array(bm)
        if dim == 1:
            meas = np.abs(verts[cells[:, 1], 0] - verts[cells[:, 0], 0])
            h = float(meas.max())
        else:
            meas = _triangle_areas(verts, cells)
            h = _max_edge(verts, cells)
        return Mesh(dim, verts, cells, meas, bf, bn, bm, h)

    def checksum(self) -> str:
        return hashlib.sha256(self.export_text().encode()).hexdigest()[:16]


def _triangle_areas(verts, cells) -> np.ndarray:
    a = verts[cells[:, 0]]
    e1 = verts[cells[:, 1]] - a
    e2 = verts[cells[:, 2]] - a
    return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _max_edge(verts, cells) -> float:
    hmax = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        d = verts[cells[:, i]] - verts[cells[:, j]]
        hmax = max(hmax, float(np.sqrt(np.einsum("ij,ij->i", d, d)).max()))
    return hmax


def build_mesh(spec: DomainSpec, h: float) -> Mesh:
    """Mesh the domain at target cell size h.

    Boundary vertices are placed exactly on the analytic boundary; curved
    facets are chords.  Raises MeshError when h is too coarse to give at
    least 8 boundary facets (2D) or when the triangulated boundary fails to
    close into a single loop.
    """
    if not h > 0:
        raise MeshError("target size h must be positive")
    if spec.dim == 1:
        return _build_interval(spec, h)
    return _build_planar(spec, h)


def _build_interval(spec: DomainSpec, h: float) -> Mesh:
    half = spec.params[0]
    n = max(2, int(math.ceil(2.0 * half / h)))
    x = np.linspace(-half, half, n + 1)
    verts = x[:, None]
    cells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    meas = np.diff(x)
    bfacets = np.array([[0], [n]])
    bnormals = np.array([[-1.0], [1.0]])
    bmeas = np.array([1.0, 1.0])
    return Mesh(1, verts, cells, meas, bfacets, bnormals, bmeas, float(meas.max()), spec)


def _build_planar(spec: DomainSpec, h: float) -> Mesh:
    ring = spec.boundary_loop(h)
    nb = len(ring)
    # polygonal boundaries are exact at any subdivision; curved ones need
    # enough chords to make sense at all
    if nb < 8 and not spec.is_polygonal:
        raise MeshError(f"h={h} too coarse: only {nb} boundary facets (need >= 8)")

    # fine polyline for clearance queries
    fine = spec.boundary_loop(h / 4.0) if nb < 4096 else ring
    tree = cKDTree(fine)

    lo = ring.min(axis=0) - h
    hi = ring.max(axis=0) + h
    dy = h * math.sqrt(3.0) / 2.0
    rows = int(math.ceil((hi[1] - lo[1]) / dy)) + 1
    cols = int(math.ceil((hi[0] - lo[0]) / h)) + 2
    ys = lo[1] + dy * np.arange(rows)
    pts = []
    for r, y in enumerate(ys):
        xs = lo[0] + h * np.arange(cols) + (0.5 * h if r % 2 else 0.0)
        pts.append(np.stack([xs, np.full_like(xs, y)], axis=1))
    lattice = np.vstack(pts)
    keep = spec.contains(lattice)
    lattice = lattice[keep]
    if len(lattice):
        dist, _ = tree.query(lattice)
        lattice = lattice[dist >= _BOUNDARY_CLEARANCE * h]

    points = np.vstack([ring, lattice])
    tri = Delaunay(points)
    cells = tri.simplices.astype(np.int64)

    # drop cells outside the domain (Delaunay fills the convex hull) and slivers
    centroids = points[cells].mean(axis=1)
    areas = _triangle_areas(points, cells)
    keep = spec.contains(centroids) & (areas > 1e-12 * h * h)
    cells = cells[keep]
    areas = areas[keep]
    if not len(cells):
        raise MeshError("triangulation produced no interior cells; refine h")

    # orient all cells counterclockwise
    a = points[cells[:, 0]]
    e1 = points[cells[:, 1]] - a
    e2 = points[cells[:, 2]] - a
    flip = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    cells[flip] = cells[flip][:, [0, 2, 1]]

    bfacets, bnormals, bmeas = _extract_boundary(points, cells, nb)
    hmax = _max_edge(points, cells)
    mesh = Mesh(2, points, cells, areas, bfacets, bnormals, bmeas, hmax, spec)
    _check_closed_loop(mesh)
    return mesh


def _extract_boundary(points, cells, n_ring):
    """Edges owned by exactly one triangle, with outward normals."""
    edges = np.vstack([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    opp = np.concatenate([cells[:, 2], cells[:, 0], cells[:, 1]])
    key = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    on_boundary = counts[inverse] == 1
    bedges = edges[on_boundary]
    bopp = opp[on_boundary]

    if np.any(bedges >= n_ring):
        raise MeshError("interior lattice point landed on the mesh boundary; refine h "
                        "or increase clearance")

    tang = points[bedges[:, 1]] - points[bedges[:, 0]]
    meas = np.linalg.norm(tang, axis=1)
    normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1) / meas[:, None]
    mid = 0.5 * (points[bedges[:, 0]] + points[bedges[:, 1]])
    inward = np.einsum("ij,ij->i", normals, points[bopp] - mid) > 0
    normals[inward] *= -1.0
    return bedges.astype(np.int64), normals, meas


def _check_closed_loop(mesh: Mesh):
    """Every boundary vertex must have exactly two incident boundary facets."""
    counts = np.bincount(mesh.boundary_facets.ravel(), minlength=mesh.num_vertices)
    bverts = counts > 0
    if not np.all(counts[bverts] == 2):
        raise MeshError("mesh boundary is not a closed loop; refine h")
    norms = np.linalg.norm(mesh.boundary_normals, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise MeshError("boundary normal not unit length")
    if np.any(mesh.cell_measures <= 0):
        raise MeshError("nonpositive cell measure")
