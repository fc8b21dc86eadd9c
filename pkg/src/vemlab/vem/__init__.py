"""Local virtual element machinery on one polygon."""

from .basis import MonomialBasis, PolyBasis, exponents, monomial_basis, monomial_index, poly_dim, working_basis
from .dofs import DofLayout, apply_R, dof_layout, dof_matrix, interpolate, r_functional
from .element import LocalOperators, VemElement, build_element, local_load, local_stiffness
from .projectors import DegenerateElementError, pi0_gradient, projector_pi_nabla
from .stabilization import StabChoice, stab_matrix

__all__ = [
    "DegenerateElementError",
    "DofLayout",
    "LocalOperators",
    "MonomialBasis",
    "PolyBasis",
    "StabChoice",
    "VemElement",
    "apply_R",
    "build_element",
    "dof_layout",
    "dof_matrix",
    "exponents",
    "interpolate",
    "local_load",
    "local_stiffness",
    "monomial_basis",
    "monomial_index",
    "pi0_gradient",
    "poly_dim",
    "projector_pi_nabla",
    "r_functional",
    "stab_matrix",
    "working_basis",
]
