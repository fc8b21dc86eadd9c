"""Stabilization forms acting on the dofs of (I - Pi) v."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..mesh import ElementGeometry
from ..quadrature import gauss_legendre, gauss_lobatto
from .dofs import DofLayout, canonical_r

BOUNDARY_STABS = ("identity", "tangential", "l2edge")
INTERNAL_STABS = ("moments", "none")


@dataclass(frozen=True)
class StabChoice:
    """Which stabilization and averaging operator to use.

    boundary: 'identity' (sum of squared boundary dofs), 'tangential'
    (h_E times the L2 norm of the tangential derivative on the boundary) or
    'l2edge' (sum over edges of h_e^-1 times the edge L2 norm).
    internal: 'moments' (sum of squared internal moments) or 'none'.
    r_operator: 'vertex', 'boundary' or 'cell' average fixing constants.
    """

    boundary: str = "identity"
    internal: str = "moments"
    r_operator: str = "vertex"
    tau: float = 1.0

    def __post_init__(self):
        if self.boundary not in BOUNDARY_STABS:
            raise ValueError(f"unknown boundary stabilization {self.boundary!r}; expected one of {BOUNDARY_STABS}")
        if self.internal not in INTERNAL_STABS:
            raise ValueError(f"unknown internal stabilization {self.internal!r}; expected one of {INTERNAL_STABS}")
        object.__setattr__(self, "r_operator", canonical_r(self.r_operator))
        if not self.tau > 0.0:
            raise ValueError("stabilization scale tau must be positive")

    def check_order(self, k: int) -> None:
        if self.r_operator == "cell" and k < 2:
            raise ValueError("the cell-average operator can only be used for k >= 2")


@lru_cache(maxsize=None)
def lobatto_lagrange_grams(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference Grams on [-1, 1] of the Lagrange basis at the k+1 Lobatto nodes.

    Returns (mass, derivative) with mass[a, b] = int l_a l_b dt and
    derivative[a, b] = int l_a' l_b' dt, both integrated exactly.
    """
    nodes = gauss_lobatto(k + 1).nodes
    vand = np.polynomial.legendre.legvander(nodes, k)
    coef = np.linalg.inv(vand)  # column a: Legendre coefficients of l_a
    q = gauss_legendre(k + 1)
    vals = np.polynomial.legendre.legvander(q.nodes, k) @ coef
    dcoef = np.polynomial.legendre.legder(coef, axis=0)
    dvals = np.polynomial.legendre.legvander(q.nodes, k - 1) @ dcoef
    mass = (vals * q.weights[:, None]).T @ vals
    deriv = (dvals * q.weights[:, None]).T @ dvals
    for arr in (mass, deriv):
        arr.setflags(write=False)
    return mass, deriv


def boundary_stab_matrix(geom: ElementGeometry, layout: DofLayout, kind: str) -> np.ndarray:
    """Unscaled matrix of s_E^boundary on the full local dof vector."""
    n = layout.n_dofs
    s = np.zeros((n, n))
    if kind == "identity":
        idx = np.arange(layout.n_boundary)
        s[idx, idx] = 1.0
        return s
    mass, deriv = lobatto_lagrange_grams(layout.k)
    for e, ids in enumerate(layout.edge_dofs):
        if kind == "tangential":
            block = geom.diameter * (2.0 / geom.edge_lengths[e]) * deriv
        elif kind == "l2edge":
            block = 0.5 * mass
        else:
            raise ValueError(f"unknown boundary stabilization {kind!r}")
        s[np.ix_(ids, ids)] += block
    return s


def stab_matrix(
    geom: ElementGeometry, layout: DofLayout, choice: StabChoice, K: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """(S_boundary, S_internal), both scaled by tau * K."""
    scale = choice.tau * K
    sb = scale * boundary_stab_matrix(geom, layout, choice.boundary)
    si = np.zeros_like(sb)
    if choice.internal == "moments" and layout.n_internal:
        idx = np.arange(layout.n_boundary, layout.n_dofs)
        si[idx, idx] = scale
    return sb, si
