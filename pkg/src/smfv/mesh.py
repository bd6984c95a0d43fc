"""Cell-centered finite-volume meshes with the two-point orthogonality property.

A mesh is admissible for two-point flux approximation when the segment
joining the centers of two neighbouring cells is orthogonal to their shared
face.  The uniform constructors below (interval and Cartesian rectangle)
satisfy that condition exactly; the ``Mesh`` container itself accepts any
admissible cell/face data, e.g. loaded from file.

Geometric quantities carried per interior face sigma = K|L:

    m_sigma   (d-1)-dimensional face measure (1.0 when d = 1)
    d_sigma   distance |x_L - x_K| between the adjacent cell centers
    d_K, d_L  distances from each center to the face, d_K + d_L = d_sigma
    tau_sigma transmissibility m_sigma / d_sigma
    m_diamond diamond-cell measure m_sigma * d_sigma / d
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REL_TOL = 1e-12


@dataclass(frozen=True)
class Cell:
    """Control volume with center ``x_K`` and d-dimensional measure ``m_K``."""

    index: int
    center: np.ndarray
    measure: float


@dataclass(frozen=True)
class InteriorEdge:
    """Face shared by cells K and L, oriented from K to L."""

    cell_k: int
    cell_l: int
    measure: float
    distance: float
    dist_k: float
    dist_l: float
    transmissibility: float
    normal_k_to_l: np.ndarray
    diamond_measure: float


@dataclass(frozen=True)
class BoundaryEdge:
    """Face on the domain boundary; fluxes through it are identically zero."""

    cell_k: int
    measure: float
    distance: float
    normal: np.ndarray


class Mesh:
    """Immutable mesh bundle plus flat numpy views used by the solver.

    ``grid_shape`` and the per-cell bounding boxes ``cell_lower`` /
    ``cell_upper`` are only set by the uniform constructors; operations that
    need the structured layout (exact indicator averaging, nested-grid
    restriction) require them.
    """

    def __init__(self, dimension, cells, interior_edges, boundary_edges,
                 mesh_size, grid_shape=None, cell_lower=None, cell_upper=None):
        self.dimension = int(dimension)
        self.cells = list(cells)
        self.interior_edges = list(interior_edges)
        self.boundary_edges = list(boundary_edges)
        self.mesh_size = float(mesh_size)
        self.grid_shape = tuple(grid_shape) if grid_shape is not None else None
        self.cell_lower = cell_lower
        self.cell_upper = cell_upper

        self.num_cells = len(self.cells)
        self.cell_centers = np.array([c.center for c in self.cells], dtype=float)
        self.cell_measures = np.array([c.measure for c in self.cells], dtype=float)
        self.total_measure = float(self.cell_measures.sum())

        self.num_interior_edges = len(self.interior_edges)
        self.edge_cell_k = np.array([e.cell_k for e in self.interior_edges], dtype=np.intp)
        self.edge_cell_l = np.array([e.cell_l for e in self.interior_edges], dtype=np.intp)
        self.edge_measure = np.array([e.measure for e in self.interior_edges], dtype=float)
        self.edge_distance = np.array([e.distance for e in self.interior_edges], dtype=float)
        self.edge_dist_k = np.array([e.dist_k for e in self.interior_edges], dtype=float)
        self.edge_dist_l = np.array([e.dist_l for e in self.interior_edges], dtype=float)
        self.edge_tau = np.array([e.transmissibility for e in self.interior_edges], dtype=float)
        self.edge_diamond = np.array([e.diamond_measure for e in self.interior_edges], dtype=float)
        if self.num_interior_edges:
            self.edge_normals = np.array([e.normal_k_to_l for e in self.interior_edges], dtype=float)
        else:
            self.edge_normals = np.zeros((0, self.dimension))

        self.regularity = self._compute_regularity()

    def _compute_regularity(self):
        # min over cell/face pairs of dist(x_K, sigma)/d_sigma; boundary faces
        # contribute 1 since d_sigma is defined there as |x_K - x_sigma|.
        ratios = []
        if self.num_interior_edges:
            ratios.append(float(np.min(np.minimum(self.edge_dist_k, self.edge_dist_l)
                                       / self.edge_distance)))
        if self.boundary_edges:
            ratios.append(1.0)
        return min(ratios) if ratios else 1.0


def uniform_interval(n_cells: int) -> Mesh:
    """Uniform mesh of (0, 1) with ``n_cells`` cells.

    Faces are points, so m_sigma = 1 by convention (their 0-dimensional
    Hausdorff measure) and tau_sigma = 1/d_sigma.
    """
    if not isinstance(n_cells, (int, np.integer)) or n_cells < 1:
        raise ValueError("n_cells must be a positive integer")
    n_cells = int(n_cells)
    faces = np.arange(n_cells + 1, dtype=float) / n_cells
    centers = (np.arange(n_cells, dtype=float) + 0.5) / n_cells

    cells = [Cell(i, np.array([centers[i]]), float(faces[i + 1] - faces[i]))
             for i in range(n_cells)]
    interior = []
    for i in range(n_cells - 1):
        dist = float(centers[i + 1] - centers[i])
        dk = float(faces[i + 1] - centers[i])
        dl = float(centers[i + 1] - faces[i + 1])
        interior.append(InteriorEdge(
            cell_k=i, cell_l=i + 1, measure=1.0, distance=dist,
            dist_k=dk, dist_l=dl, transmissibility=1.0 / dist,
            normal_k_to_l=np.array([1.0]), diamond_measure=dist))
    boundary = [
        BoundaryEdge(0, 1.0, float(centers[0] - faces[0]), np.array([-1.0])),
        BoundaryEdge(n_cells - 1, 1.0, float(faces[-1] - centers[-1]), np.array([1.0])),
    ]
    lower = faces[:-1, None].copy()
    upper = faces[1:, None].copy()
    return Mesh(1, cells, interior, boundary, mesh_size=1.0 / n_cells,
                grid_shape=(n_cells,), cell_lower=lower, cell_upper=upper)


def uniform_rectangle(nx: int, ny: int) -> Mesh:
    """Uniform Cartesian mesh of the unit square with nx-by-ny cells.

    Cells are indexed row-major, ``k = iy * nx + ix``; interior edges are
    listed x-direction first, then y-direction, each ordered by the index of
    their K cell.  The orthogonality condition holds exactly.
    """
    for name, value in (("nx", nx), ("ny", ny)):
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise ValueError(f"{name} must be a positive integer")
    nx, ny = int(nx), int(ny)
    xf = np.arange(nx + 1, dtype=float) / nx
    yf = np.arange(ny + 1, dtype=float) / ny
    xc = (np.arange(nx, dtype=float) + 0.5) / nx
    yc = (np.arange(ny, dtype=float) + 0.5) / ny

    def cell_index(ix, iy):
        return iy * nx + ix

    cells = []
    lower = np.zeros((nx * ny, 2))
    upper = np.zeros((nx * ny, 2))
    for iy in range(ny):
        hy = float(yf[iy + 1] - yf[iy])
        for ix in range(nx):
            hx = float(xf[ix + 1] - xf[ix])
            k = cell_index(ix, iy)
            cells.append(Cell(k, np.array([xc[ix], yc[iy]]), hx * hy))
            lower[k] = (xf[ix], yf[iy])
            upper[k] = (xf[ix + 1], yf[iy + 1])

    interior = []
    ex = np.array([1.0, 0.0])
    ey = np.array([0.0, 1.0])
    # vertical faces (normal along +x)
    for iy in range(ny):
        m_sig = float(yf[iy + 1] - yf[iy])
        for ix in range(nx - 1):
            dist = float(xc[ix + 1] - xc[ix])
            dk = float(xf[ix + 1] - xc[ix])
            dl = float(xc[ix + 1] - xf[ix + 1])
            interior.append(InteriorEdge(
                cell_k=cell_index(ix, iy), cell_l=cell_index(ix + 1, iy),
                measure=m_sig, distance=dist, dist_k=dk, dist_l=dl,
                transmissibility=m_sig / dist, normal_k_to_l=ex,
                diamond_measure=m_sig * dist / 2.0))
    # horizontal faces (normal along +y)
    for iy in range(ny - 1):
        dist = float(yc[iy + 1] - yc[iy])
        dk = float(yf[iy + 1] - yc[iy])
        dl = float(yc[iy + 1] - yf[iy + 1])
        for ix in range(nx):
            m_sig = float(xf[ix + 1] - xf[ix])
            interior.append(InteriorEdge(
                cell_k=cell_index(ix, iy), cell_l=cell_index(ix, iy + 1),
                measure=m_sig, distance=dist, dist_k=dk, dist_l=dl,
                transmissibility=m_sig / dist, normal_k_to_l=ey,
                diamond_measure=m_sig * dist / 2.0))

    boundary = []
    for iy in range(ny):
        m_sig = float(yf[iy + 1] - yf[iy])
        boundary.append(BoundaryEdge(cell_index(0, iy), m_sig,
                                     float(xc[0] - xf[0]), -ex))
        boundary.append(BoundaryEdge(cell_index(nx - 1, iy), m_sig,
                                     float(xf[-1] - xc[-1]), ex))
    for ix in range(nx):
        m_sig = float(xf[ix + 1] - xf[ix])
        boundary.append(BoundaryEdge(cell_index(ix, 0), m_sig,
                                     float(yc[0] - yf[0]), -ey))
        boundary.append(BoundaryEdge(cell_index(ix, ny - 1), m_sig,
                                     float(yf[-1] - yc[-1]), ey))

    h = math.hypot(1.0 / nx, 1.0 / ny)
    return Mesh(2, cells, interior, boundary, mesh_size=h,
                grid_shape=(nx, ny), cell_lower=lower, cell_upper=upper)


def validate(mesh: Mesh, rel_tol: float = REL_TOL) -> list:
    """Check every stored quantity for consistency; return violation messages.

    An empty list means the mesh satisfies all structural invariants within
    ``rel_tol`` relative tolerance.
    """
    bad = []
    d = mesh.dimension

    for c in mesh.cells:
        if not c.measure > 0.0:
            bad.append(f"cell {c.index}: nonpositive measure {c.measure}")
    total = float(mesh.cell_measures.sum())
    if abs(total - mesh.total_measure) > rel_tol * abs(mesh.total_measure):
        bad.append(f"mesh: cell measures sum to {total}, "
                   f"stored total measure is {mesh.total_measure}")

    half_diamond = np.zeros(mesh.num_cells)
    for i, e in enumerate(mesh.interior_edges):
        label = f"interior edge {i} ({e.cell_k}|{e.cell_l})"
        if not (e.measure > 0 and e.distance > 0 and e.dist_k > 0 and e.dist_l > 0):
            bad.append(f"{label}: nonpositive geometric quantity")
            continue
        if abs(e.dist_k + e.dist_l - e.distance) > rel_tol * e.distance:
            bad.append(f"{label}: center-to-face distances do not sum "
                       f"to the center distance")
        nrm = float(np.linalg.norm(e.normal_k_to_l))
        if abs(nrm - 1.0) > rel_tol:
            bad.append(f"{label}: normal is not a unit vector (|n| = {nrm})")
        dx = mesh.cell_centers[e.cell_l] - mesh.cell_centers[e.cell_k]
        dot = float(np.dot(e.normal_k_to_l, dx))
        if abs(dot - e.distance) > rel_tol * e.distance:
            bad.append(f"{label}: orthogonality condition violated "
                       f"(n.(x_L - x_K) = {dot}, d_sigma = {e.distance})")
        expected_diamond = e.measure * e.distance / d
        if abs(e.diamond_measure - expected_diamond) > rel_tol * expected_diamond:
            bad.append(f"{label}: diamond measure {e.diamond_measure} differs "
                       f"from m_sigma*d_sigma/d = {expected_diamond}")
        expected_tau = e.measure / e.distance
        if abs(e.transmissibility - expected_tau) > rel_tol * expected_tau:
            bad.append(f"{label}: transmissibility {e.transmissibility} differs "
                       f"from m_sigma/d_sigma = {expected_tau}")
        half_diamond[e.cell_k] += e.measure * e.dist_k / d
        half_diamond[e.cell_l] += e.measure * e.dist_l / d

    for i, b in enumerate(mesh.boundary_edges):
        label = f"boundary edge {i} (cell {b.cell_k})"
        if not (b.measure > 0 and b.distance > 0):
            bad.append(f"{label}: nonpositive geometric quantity")
            continue
        nrm = float(np.linalg.norm(b.normal))
        if abs(nrm - 1.0) > rel_tol:
            bad.append(f"{label}: normal is not a unit vector (|n| = {nrm})")
        half_diamond[b.cell_k] += b.measure * b.distance / d

    for c in mesh.cells:
        if abs(half_diamond[c.index] - c.measure) > rel_tol * c.measure:
            bad.append(f"cell {c.index}: half-diamond measures sum to "
                       f"{half_diamond[c.index]}, cell measure is {c.measure}")

    zeta = mesh._compute_regularity()
    if not zeta > 0.0:
        bad.append(f"mesh: regularity factor {zeta} is not positive")
    if abs(zeta - mesh.regularity) > rel_tol * max(abs(zeta), 1e-300):
        bad.append(f"mesh: stored regularity {mesh.regularity} differs "
                   f"from recomputed {zeta}")
    return bad


def dump_csv(mesh: Mesh, path) -> None:
    """Write one row per cell and per edge, spreadsheet-ready."""
    def fmt(x):
        return f"{x:.17g}"

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,index,cell_k,cell_l,x,y,measure,m_sigma,d_sigma,tau_sigma\n")
        for c in mesh.cells:
            y = fmt(c.center[1]) if mesh.dimension == 2 else ""
            fh.write(f"cell,{c.index},,,{fmt(c.center[0])},{y},{fmt(c.measure)},,,\n")
        for i, e in enumerate(mesh.interior_edges):
            fh.write(f"interior_edge,{i},{e.cell_k},{e.cell_l},,,,"
                     f"{fmt(e.measure)},{fmt(e.distance)},{fmt(e.transmissibility)}\n")
        for i, b in enumerate(mesh.boundary_edges):
            fh.write(f"boundary_edge,{i},{b.cell_k},,,,,"
                     f"{fmt(b.measure)},{fmt(b.distance)},{fmt(b.measure / b.distance)}\n")
