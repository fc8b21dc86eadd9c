"""Global dof numbering, sparse assembly, Dirichlet elimination and PCG."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import PolyMesh, element_geometry
from .quadrature import gauss_lobatto
from .vem import StabChoice, VemElement, build_element, poly_dim

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class GlobalDofMap:
    """Global numbering: vertices, then edge-interior dofs edge by edge, then cell moments.

    Edge-interior dofs run from the lower to the higher global vertex index of
    the edge, so both neighbours of an edge address the same physical points.
    """

    k: int
    n_vertices: int
    n_edges: int
    n_cells: int
    cell_dofs: tuple[np.ndarray, ...]
    boundary_dofs: np.ndarray
    points: np.ndarray  # coordinates of the vertex and edge dofs

    @property
    def n_internal(self) -> int:
        return poly_dim(self.k - 2)

    @property
    def n_dofs(self) -> int:
        return self.n_vertices + (self.k - 1) * self.n_edges + self.n_internal * self.n_cells

    def vertex_range(self) -> range:
        return range(self.n_vertices)

    def edge_range(self, e: int) -> range:
        start = self.n_vertices + e * (self.k - 1)
        return range(start, start + self.k - 1)

    def cell_range(self, c: int) -> range:
        start = self.n_vertices + (self.k - 1) * self.n_edges + c * self.n_internal
        return range(start, start + self.n_internal)


def build_dof_map(mesh: PolyMesh, k: int) -> GlobalDofMap:
    if k < 1:
        raise ValueError("k must be >= 1")
    nv, ne, nc = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    nint = poly_dim(k - 2)
    edge_base = nv
    cell_base = nv + (k - 1) * ne
    fwd = np.arange(k - 1)
    cell_dofs = []
    for c, cyc in enumerate(mesh.cells):
        n = len(cyc)
        parts = [np.asarray(cyc, dtype=np.int64)]
        for li, e in enumerate(mesh.cell_edges[c]):
            a, b = cyc[li], cyc[(li + 1) % n]
            base = edge_base + e * (k - 1)
            parts.append(base + (fwd if a < b else fwd[::-1]))
        parts.append(cell_base + c * nint + np.arange(nint))
        d = np.concatenate(parts)
        d.setflags(write=False)
        cell_dofs.append(d)

    t = 0.5 * (gauss_lobatto(k + 1).nodes[1:-1] + 1.0)
    pa = mesh.vertices[mesh.edges[:, 0]]
    pb = mesh.vertices[mesh.edges[:, 1]]
    edge_pts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    points = np.concatenate([mesh.vertices, edge_pts.reshape(-1, 2)])

    bnd_edges = mesh.boundary_edges
    bnd = [np.flatnonzero(mesh.boundary_vertex_flags)]
    bnd.extend(edge_base + e * (k - 1) + fwd for e in bnd_edges)
    boundary = np.unique(np.concatenate(bnd)).astype(np.int64)
    return GlobalDofMap(k, nv, ne, nc, tuple(cell_dofs), boundary, points)


@dataclass(eq=False)
class Discretization:
    mesh: PolyMesh
    k: int
    choice: StabChoice
    dofmap: GlobalDofMap
    elements: list[VemElement]
    K: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    def interpolate(self, u: Field) -> np.ndarray:
        """Global dofs of the interpolant of u."""
        out = np.empty(self.n_dofs)
        for el, dofs in zip(self.elements, self.dofmap.cell_dofs):
            out[dofs] = el.interpolate(u)
        return out


def discretize(mesh: PolyMesh, k: int, choice: StabChoice | None = None, K=1.0) -> Discretization:
    choice = choice or StabChoice()
    choice.check_order(k)
    kk = np.broadcast_to(np.asarray(K, dtype=float), (mesh.n_cells,)).copy()
    if np.any(kk <= 0.0):
        raise ValueError("diffusion coefficient must be positive")
    elements = [build_element(element_geometry(mesh, c), k, choice, kk[c]) for c in range(mesh.n_cells)]
    return Discretization(mesh, k, choice, build_dof_map(mesh, k), elements, kk)


@dataclass(eq=False)
class SparseSystem:
    """Reduced SPD system on the free dofs plus what is needed to rebuild the full vector."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    full_matrix: sp.csr_matrix | None = None
    full_rhs: np.ndarray | None = None
    discretization: Discretization | None = field(default=None, repr=False)

    @property
    def n_dofs(self) -> int:
        return len(self.free) + len(self.fixed)

    @classmethod
    def from_matrix(cls, matrix, rhs) -> "SparseSystem":
        """Unconstrained system A x = b."""
        a = sp.csr_matrix(matrix, dtype=float)
        b = np.asarray(rhs, dtype=float)
        n = a.shape[0]
        empty = np.zeros(0, dtype=np.int64)
        return cls(a, b, np.arange(n), empty, np.zeros(0), a, b)

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_dofs)
        out[self.free] = x_free
        out[self.fixed] = self.fixed_values
        return out


def assemble_matrix(disc: Discretization) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for el, dofs in zip(disc.elements, disc.dofmap.cell_dofs):
        n = len(dofs)
        rows.append(np.repeat(dofs, n))
        cols.append(np.tile(dofs, n))
        vals.append(el.ops.A_h.ravel())
    n = disc.n_dofs
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    a.sum_duplicates()
    return a


def assemble_load(disc: Discretization, f: Field | None) -> np.ndarray:
    b = np.zeros(disc.n_dofs)
    if f is None:
        return b
    for el, dofs in zip(disc.elements, disc.dofmap.cell_dofs):
        np.add.at(b, dofs, el.load(f))
    return b


def assemble_discretization(disc: Discretization, f: Field | None, g: Field | None = None) -> SparseSystem:
    a = assemble_matrix(disc)
    b = assemble_load(disc, f)
    fixed = disc.dofmap.boundary_dofs
    free = np.setdiff1d(np.arange(disc.n_dofs), fixed)
    if g is None:
        gv = np.zeros(len(fixed))
    else:
        pts = disc.dofmap.points[fixed]
        gv = np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(len(fixed))
    a_ff = a[free][:, free].tocsr()
    rhs = b[free] - a[free][:, fixed] @ gv
    return SparseSystem(a_ff, rhs, free, fixed, gv, a, b, disc)


def assemble(
    mesh: PolyMesh,
    k: int,
    choice: StabChoice | None = None,
    K=1.0,
    f: Field | None = None,
    g: Field | None = None,
) -> SparseSystem:
    """Assemble a^h and <f_h, .> and eliminate Dirichlet data g (default 0)."""
    return assemble_discretization(discretize(mesh, k, choice, K), f, g)


@dataclass
class PCGResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)


def pcg(
    a,
    b: np.ndarray,
    tol: float = 1e-12,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
    callback: Callable[[np.ndarray], None] | None = None,
) -> PCGResult:
    """Jacobi-preconditioned conjugate gradients.

    Stops when ||r|| <= tol * ||b||. Raises SolverError on a non-positive
    curvature direction (matrix not SPD) or when maxiter (default 50 n) is hit.
    """
    n = len(b)
    maxiter = 50 * n if maxiter is None else maxiter
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0 and x0 is None:
        return PCGResult(x, 0, 0.0)
    diag = a.diagonal() if sp.issparse(a) else np.diag(a)
    if np.any(diag <= 0.0):
        raise SolverError("matrix has a non-positive diagonal entry; it is not SPD")
    inv_diag = 1.0 / diag
    r = b - a @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    target = tol * (bnorm if bnorm > 0 else 1.0)
    history = [float(np.linalg.norm(r))]
    for it in range(1, maxiter + 1):
        if history[-1] <= target:
            return PCGResult(x, it - 1, history[-1] / max(bnorm, 1e-300), history)
        ap = a @ p
        curv = float(p @ ap)
        if curv <= 0.0:
            raise SolverError(
                "non-positive curvature in CG: the matrix is not positive definite",
                history[-1] / max(bnorm, 1e-300),
                it,
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * ap
        if callback is not None:
            callback(x)
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        history.append(float(np.linalg.norm(r)))
    rel = history[-1] / max(bnorm, 1e-300)
    if history[-1] <= target:
        return PCGResult(x, maxiter, rel, history)
    raise SolverError(f"CG did not converge in {maxiter} iterations (relative residual {rel:.3e})", rel, maxiter)


def solve(system: SparseSystem, tol: float = 1e-12, maxiter: int | None = None) -> np.ndarray:
    """Solve the reduced system by Jacobi PCG; return the full dof vector."""
    if len(system.free) == 0:
        return system.expand(np.zeros(0))
    res = pcg(system.matrix, system.rhs, tol=tol, maxiter=maxiter)
    log.debug("PCG: %d iterations, relative residual %.3e", res.iterations, res.residual)
    return system.expand(res.x)
