"""Projections computable from the degrees of freedom.

Both projectors only need, for each dof basis function phi_j, integrals of
phi_j against polynomials. Integration by parts turns those into internal
moments (volume part) plus edge integrals of the known boundary trace, and
the (k+1)-point Gauss-Lobatto rule on an edge is exact for the products that
appear (degree <= 2k - 1).

Every function takes the basis in which the result is expressed and,
separately, the scaled monomial basis that defines the internal moments
(`dof_basis`, defaulting to the same basis). Volume terms int_E phi_j q with
q in P_{k-2} become |E| times the coefficients of q in that basis.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..mesh import ElementGeometry
from .basis import PolyBasis, poly_dim
from .dofs import DofLayout, dof_matrix, r_functional


class DegenerateElementError(np.linalg.LinAlgError):
    pass


def _edge_quadrature(geom: ElementGeometry, layout: DofLayout):
    """Lobatto nodes of every edge, flattened: (dof ids, points, weights, normals)."""
    ids = layout.edge_dofs.ravel()
    w = (0.5 * geom.edge_lengths[:, None] * layout.lobatto.weights[None, :]).ravel()
    nrm = np.repeat(geom.normals, layout.k + 1, axis=0)
    return ids, layout.points[ids], w, nrm


def _boundary_flux(geom, layout, values_fn) -> np.ndarray:
    # sum over edges of int_e phi_j * g, with g sampled at the Lobatto nodes
    ids, pts, w, nrm = _edge_quadrature(geom, layout)
    g = values_fn(pts, nrm)  # (n_nodes, n_poly)
    out = np.zeros((g.shape[1], layout.n_dofs))
    np.add.at(out.T, ids, w[:, None] * g)
    return out


def _volume(basis: PolyBasis, dof_basis: PolyBasis | None, coef: np.ndarray, degree: int) -> np.ndarray:
    # coef: (dim(degree), n) coefficients in `basis`; return them in the dof basis
    if dof_basis is None or dof_basis is basis:
        return coef
    return basis.coefficients_in(dof_basis, degree) @ coef


def energy_rhs(geom: ElementGeometry, layout: DofLayout, basis: PolyBasis, dof_basis=None) -> np.ndarray:
    """B[a, j] = int_E grad phi_j . grad b_a, via integration by parts."""

    def flux(pts, nrm):
        g = basis.grad(pts)
        return (g * nrm[:, None, :]).sum(axis=-1)

    b = _boundary_flux(geom, layout, flux)
    if layout.n_internal:
        lap = _volume(basis, dof_basis, basis.laplacian_map(), layout.k - 2)  # (dim k-2, dim k)
        b[:, layout.internal] -= geom.area * lap.T
    return b


def projector_system(geom, layout, basis, r_operator: str, dof_basis=None) -> tuple[np.ndarray, np.ndarray]:
    """(G, B) with the first row replaced by the averaging condition."""
    r = r_functional(geom, layout, r_operator)
    d = dof_matrix(layout, basis, dof_basis)
    g = basis.stiffness().copy()
    b = energy_rhs(geom, layout, basis, dof_basis)
    g[0] = r @ d
    b[0] = r
    return g, b


def projector_pi_nabla(geom, layout, basis, choice, dof_basis=None) -> np.ndarray:
    """Coefficients in `basis` of Pi-nabla phi_j, one column per dof."""
    r_operator = getattr(choice, "r_operator", choice)
    g, b = projector_system(geom, layout, basis, r_operator, dof_basis)
    try:
        lu = sla.lu_factor(g, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise DegenerateElementError(f"singular projector system: {exc}") from None
    if np.any(np.abs(np.diag(lu[0])) <= 1e-14 * np.abs(g).max()):
        raise DegenerateElementError("singular projector system (degenerate element)")
    return sla.lu_solve(lu, b)


def pi0_gradient(geom: ElementGeometry, layout: DofLayout, basis: PolyBasis, dof_basis=None):
    """L2 projection onto P_{k-1} of d/dx phi_j and d/dy phi_j, as coefficient matrices in `basis`."""
    k = layout.k
    mass = basis.mass(k - 1)
    dx, dy = basis.derivative_maps(k - 1)  # (dim k-2, dim k-1)
    out = []
    for comp, dmap in ((0, dx), (1, dy)):

        def edge_term(pts, nrm, comp=comp):
            return basis.eval(pts, k - 1) * nrm[:, comp : comp + 1]

        rhs = _boundary_flux(geom, layout, edge_term)
        if layout.n_internal:
            rhs[:, layout.internal] -= geom.area * _volume(basis, dof_basis, dmap, k - 2).T
        try:
            out.append(np.linalg.solve(mass, rhs))
        except np.linalg.LinAlgError:
            raise DegenerateElementError("singular P_{k-1} mass matrix") from None
    return out[0], out[1]


def pi0_values(geom, layout, basis, k_target: int, dof_basis=None) -> np.ndarray:
    """L2 projection onto P_{k_target} (k_target <= k-2) of each dof basis function, in `basis`."""
    n = poly_dim(k_target)
    # int_E phi_j b_a = |E| * (coefficients of b_a in the dof basis) . internal dofs
    coef = np.eye(n) if dof_basis is None or dof_basis is basis else basis.coefficients_in(dof_basis, k_target)
    rhs = np.zeros((n, layout.n_dofs))
    rhs[:, layout.n_boundary : layout.n_boundary + n] = geom.area * coef.T
    return np.linalg.solve(basis.mass(k_target), rhs)
