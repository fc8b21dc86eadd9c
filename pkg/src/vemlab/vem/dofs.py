"""Local degrees of freedom of the order-k virtual element space.

Local numbering on a cell with N vertices:

* 0 .. N-1: values at the vertices, in the cell's CCW order;
* N .. Nk-1: values at the k-1 interior Gauss-Lobatto points of each edge,
  edge by edge, each edge traversed from its start vertex;
* Nk .. Nk + k(k-1)/2 - 1: moments |E|^-1 int_E v m_a against the scaled
  monomials of degree <= k-2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..mesh import ElementGeometry
from ..quadrature import QuadRule1D, gauss_lobatto, polygon_rule
from .basis import MonomialBasis, poly_dim

R_CHOICES = ("cell", "boundary", "vertex")
_R_ALIASES = {
    "cell_mean": "cell",
    "boundary_mean": "boundary",
    "vertex_mean": "vertex",
}


def canonical_r(choice: str) -> str:
    choice = _R_ALIASES.get(choice, choice)
    if choice not in R_CHOICES:
        raise ValueError(f"unknown averaging operator {choice!r}; expected one of {R_CHOICES}")
    return choice


@dataclass(frozen=True, eq=False)
class DofLayout:
    k: int
    n_vertices: int
    lobatto: QuadRule1D  # k+1 point rule on [-1, 1]
    edge_dofs: np.ndarray  # (N, k+1) local dof index at each Lobatto node of each edge
    points: np.ndarray  # (N*k, 2) coordinates of the boundary dofs

    @property
    def n_boundary(self) -> int:
        return self.n_vertices * self.k

    @property
    def n_internal(self) -> int:
        return poly_dim(self.k - 2)

    @property
    def n_dofs(self) -> int:
        return self.n_boundary + self.n_internal

    @property
    def internal(self) -> slice:
        return slice(self.n_boundary, self.n_dofs)


def dof_layout(geom: ElementGeometry, k: int) -> DofLayout:
    if k < 1:
        raise ValueError("polynomial order k must be >= 1")
    n = geom.n_edges
    rule = gauss_lobatto(k + 1)
    verts = geom.vertices
    nxt = np.roll(verts, -1, axis=0)
    t = 0.5 * (rule.nodes[1:-1] + 1.0)
    interior = verts[:, None, :] + t[None, :, None] * (nxt - verts)[:, None, :]
    points = np.concatenate([verts, interior.reshape(-1, 2)])
    edge_dofs = np.empty((n, k + 1), dtype=np.int64)
    edge_dofs[:, 0] = np.arange(n)
    edge_dofs[:, -1] = (np.arange(n) + 1) % n
    edge_dofs[:, 1:-1] = n + np.arange(n)[:, None] * (k - 1) + np.arange(k - 1)[None, :]
    for arr in (edge_dofs, points):
        arr.setflags(write=False)
    return DofLayout(k, n, rule, edge_dofs, points)


def boundary_weights(geom: ElementGeometry, layout: DofLayout) -> np.ndarray:
    """Weights w with int_{dE} v ds = w . dofs for v of degree <= 2k-1 on each edge."""
    w = np.zeros(layout.n_dofs)
    half = 0.5 * geom.edge_lengths
    np.add.at(w, layout.edge_dofs, half[:, None] * layout.lobatto.weights[None, :])
    return w


def r_functional(geom: ElementGeometry, layout: DofLayout, choice: str) -> np.ndarray:
    """Row vector r such that R v = r . dofs(v)."""
    choice = canonical_r(choice)
    r = np.zeros(layout.n_dofs)
    if choice == "vertex":
        r[: layout.n_vertices] = 1.0 / layout.n_vertices
    elif choice == "boundary":
        r = boundary_weights(geom, layout) / geom.perimeter
    else:
        if layout.k < 2:
            raise ValueError("the cell-average operator needs k >= 2 (it uses the first internal moment)")
        r[layout.n_boundary] = 1.0
    return r


def apply_R(geom: ElementGeometry, layout: DofLayout, choice: str, dofs) -> float:
    """The constant R v, computed from the dofs of v."""
    return float(r_functional(geom, layout, choice) @ np.asarray(dofs, dtype=float))


def dof_matrix(layout: DofLayout, basis: MonomialBasis, dof_basis: MonomialBasis | None = None) -> np.ndarray:
    """(n_dofs, dim P_k) matrix whose column a holds the dofs of the basis function b_a.

    dof_basis is the scaled monomial basis defining the internal moments;
    it defaults to `basis` itself.
    """
    d = np.empty((layout.n_dofs, basis.dim))
    d[: layout.n_boundary] = basis.eval(layout.points)
    if layout.n_internal:
        if dof_basis is None or dof_basis is basis:
            mom = basis.mass()[: layout.n_internal]
        else:
            mom = basis.cross_mass(dof_basis, layout.k - 2).T
        d[layout.n_boundary :] = mom / basis.area
    return d


def interpolate(
    geom: ElementGeometry,
    layout: DofLayout,
    basis: MonomialBasis,
    u: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    """Degrees-of-freedom interpolant of a continuous field u(x, y)."""
    out = np.empty(layout.n_dofs)
    pts = layout.points
    out[: layout.n_boundary] = u(pts[:, 0], pts[:, 1])
    if layout.n_internal:
        rule = polygon_rule(geom.vertices, 2 * layout.k + 2, geom.centroid)
        vals = u(rule.points[:, 0], rule.points[:, 1])
        m = basis.eval(rule.points, layout.k - 2)
        out[layout.n_boundary :] = (rule.weights * vals) @ m / geom.area
    return out
