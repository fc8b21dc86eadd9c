"""Local stiffness matrix and load vector on one polygon."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..mesh import ElementGeometry
from ..quadrature import polygon_rule
from .basis import MonomialBasis, PolyBasis, monomial_basis, working_basis
from .dofs import DofLayout, dof_layout, dof_matrix, interpolate
from .projectors import pi0_gradient, pi0_values, projector_pi_nabla
from .stabilization import StabChoice, stab_matrix


@dataclass(frozen=True, eq=False)
class LocalOperators:
    PiStar: np.ndarray  # (dim P_k, n_dofs) scaled-monomial coefficients of Pi-nabla phi_j
    PiDof: np.ndarray  # (n_dofs, n_dofs) dofs of Pi-nabla phi_j
    S_boundary: np.ndarray
    S_internal: np.ndarray
    A_h: np.ndarray
    Pi0Grad: tuple[np.ndarray, np.ndarray]  # coefficients in the working basis of P_{k-1}
    K_E: float
    tau_E: float
    PiWork: np.ndarray | None = None  # Pi-nabla phi_j in the working basis

    @property
    def consistency(self) -> np.ndarray:
        """The polynomial part K_E a_E(Pi v, Pi w) of A_h."""
        return self.A_h - self.stability

    @property
    def stability(self) -> np.ndarray:
        c = np.eye(len(self.PiDof)) - self.PiDof
        return c.T @ (self.S_boundary + self.S_internal) @ c


def pi_nabla_work(
    geom: ElementGeometry, layout: DofLayout, basis: MonomialBasis, work: PolyBasis, choice
) -> tuple[np.ndarray, np.ndarray]:
    """(piw, d): Pi-nabla phi_j in `work` and the dofs of the `work` functions."""
    dof_basis = None if work is basis else basis
    piw = projector_pi_nabla(geom, layout, work, choice, dof_basis)
    d = dof_matrix(layout, work, dof_basis)
    # one correction step so that piw @ d = I holds to second order in the solve error
    piw = 2.0 * piw - piw @ (d @ piw)
    return piw, d


def local_stiffness(
    geom: ElementGeometry,
    layout: DofLayout,
    basis: MonomialBasis,
    choice: StabChoice,
    K_E: float = 1.0,
    work: PolyBasis | None = None,
) -> LocalOperators:
    """Local operators; the solves run in `work` (default: `basis`), results are reported in both."""
    choice.check_order(layout.k)
    work = basis if work is None else work
    dof_basis = None if work is basis else basis
    piw, d = pi_nabla_work(geom, layout, basis, work, choice)
    pidof = d @ piw
    g = work.stiffness()
    sb, si = stab_matrix(geom, layout, choice, K_E)
    c = np.eye(layout.n_dofs) - pidof
    a = K_E * (piw.T @ g @ piw) + c.T @ (sb + si) @ c
    a = 0.5 * (a + a.T)
    pistar = piw if work is basis else work.coefficients_in(basis) @ piw
    grads = pi0_gradient(geom, layout, work, dof_basis)
    return LocalOperators(pistar, pidof, sb, si, a, grads, K_E, choice.tau, piw)


def local_load(
    geom: ElementGeometry,
    layout: DofLayout,
    basis: MonomialBasis,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    work: PolyBasis | None = None,
) -> np.ndarray:
    """<f_h, phi_j> for every local dof.

    k >= 2: int_E f Pi0_{k-2} phi_j, which only touches the internal dofs.
    k = 1:  (int_E f) times the vertex average of phi_j.
    """
    k = layout.k
    rule = polygon_rule(geom.vertices, 2 * k, geom.centroid)
    fv = f(rule.points[:, 0], rule.points[:, 1]) * np.ones(len(rule.weights))
    out = np.zeros(layout.n_dofs)
    if k == 1:
        out[: layout.n_vertices] = (rule.weights @ fv) / layout.n_vertices
        return out
    work = basis if work is None else work
    dof_basis = None if work is basis else basis
    fmom = (rule.weights * fv) @ work.eval(rule.points, k - 2)
    out[:] = fmom @ pi0_values(geom, layout, work, k - 2, dof_basis)
    return out


@dataclass(frozen=True, eq=False)
class VemElement:
    """Everything the global solver needs for one cell."""

    geom: ElementGeometry
    layout: DofLayout
    basis: MonomialBasis  # scaled monomials, defining the internal moments
    ops: LocalOperators
    work: PolyBasis | None = None  # well-conditioned basis used for the solves

    @property
    def k(self) -> int:
        return self.layout.k

    @property
    def solve_basis(self) -> PolyBasis:
        return self.basis if self.work is None else self.work

    def interpolate(self, u) -> np.ndarray:
        return interpolate(self.geom, self.layout, self.basis, u)

    def load(self, f) -> np.ndarray:
        return local_load(self.geom, self.layout, self.basis, f, self.work)

    def pi_nabla(self, dofs) -> np.ndarray:
        """Scaled-monomial coefficients of Pi-nabla v."""
        return self.ops.PiStar @ dofs

    def pi_nabla_values(self, points, dofs) -> np.ndarray:
        piw = self.ops.PiStar if self.ops.PiWork is None else self.ops.PiWork
        return self.solve_basis.eval(points) @ (piw @ dofs)

    def pi0_grad(self, dofs) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients of Pi0_{k-1} grad v in the solve basis."""
        px, py = self.ops.Pi0Grad
        return px @ dofs, py @ dofs

    def pi0_grad_values(self, points, dofs) -> tuple[np.ndarray, np.ndarray]:
        m = self.solve_basis.eval(points, self.k - 1)
        gx, gy = self.pi0_grad(dofs)
        return m @ gx, m @ gy


def build_element(
    geom: ElementGeometry, k: int, choice: StabChoice, K_E: float = 1.0, conditioned: bool = True
) -> VemElement:
    """Local element; with `conditioned` the solves use the principal-axes orthonormal basis."""
    layout = dof_layout(geom, k)
    basis = monomial_basis(geom, k)
    work = working_basis(geom, k) if conditioned else None
    ops = local_stiffness(geom, layout, basis, choice, K_E, work)
    return VemElement(geom, layout, basis, ops, work)
