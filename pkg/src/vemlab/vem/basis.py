"""Polynomial bases of P_k on one element.

The scaled monomials m_a(x, y) = ((x - xE)/hE)^a1 ((y - yE)/hE)^a2 define
the internal moment dofs. On stretched cells they are badly conditioned at
high order, so the local solves use a second basis of the same space:
monomials in the principal-axes frame of the cell, orthonormalized in
L2(E) / |E|. Both are instances of PolyBasis, which represents

    b_j(x) = sum_a T[a, j] xi(x)^a,   xi(x) = F (x - c),

with F a 2x2 frame and T upper triangular in graded order, so the first
dim(P_d) functions span P_d for every d <= k. Conversions between two bases
with the same center are exact polynomial substitutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import comb

import numpy as np
import scipy.linalg as sla

from ..mesh import ElementGeometry
from ..quadrature import polygon_moments


def poly_dim(k: int) -> int:
    """Dimension of P_k in two variables (0 for k < 0)."""
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


@lru_cache(maxsize=None)
def exponents(k: int) -> np.ndarray:
    """Exponent pairs of degree <= k in graded lexicographic order.

    Degree d occupies indices d(d+1)/2 .. d(d+1)/2 + d, ordered by the
    y-exponent: (d, 0), (d-1, 1), ..., (0, d).
    """
    out = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    arr = np.array(out, dtype=np.int64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


def monomial_index(a: int, b: int) -> int:
    d = a + b
    return d * (d + 1) // 2 + b


@lru_cache(maxsize=None)
def _derivative_maps(k: int) -> tuple[np.ndarray, np.ndarray]:
    # d/dxi and d/deta of raw monomials as (dim(k-1), dim(k)) coefficient maps
    dx = np.zeros((poly_dim(k - 1), poly_dim(k)))
    dy = np.zeros_like(dx)
    for i, (a, b) in enumerate(exponents(k)):
        if a > 0:
            dx[monomial_index(a - 1, b), i] = a
        if b > 0:
            dy[monomial_index(a, b - 1), i] = b
    return dx, dy


def linear_substitution(a: np.ndarray, k: int) -> np.ndarray:
    """Matrix S with xi^alpha = sum_g S[g, alpha] mu^g when xi = a @ mu.

    Block diagonal by degree (the substitution is homogeneous).
    """
    a = np.asarray(a, dtype=float)
    n = poly_dim(k)
    s = np.zeros((n, n))
    for d in range(k + 1):
        base = d * (d + 1) // 2
        for j in range(d + 1):
            p, q = d - j, j  # xi1^p xi2^q
            # coefficient vectors indexed by the mu2 exponent
            u = np.array([comb(p, r) * a[0, 0] ** (p - r) * a[0, 1] ** r for r in range(p + 1)])
            v = np.array([comb(q, r) * a[1, 0] ** (q - r) * a[1, 1] ** r for r in range(q + 1)])
            s[base : base + d + 1, base + j] = np.convolve(u, v)
    return s


@dataclass(frozen=True, eq=False)
class PolyBasis:
    k: int
    center: np.ndarray
    frame: np.ndarray  # F, xi = F (x - c)
    transform: np.ndarray  # T, (dim, dim) upper triangular
    raw_moments: np.ndarray  # raw_moments[a, b] = int_E xi1^a xi2^b dx, a + b <= 2k
    h: float  # element diameter, kept for reference
    _coef_cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def dim(self) -> int:
        return poly_dim(self.k)

    @property
    def exponents(self) -> np.ndarray:
        return exponents(self.k)

    @property
    def moments(self) -> np.ndarray:
        return self.raw_moments

    @property
    def area(self) -> float:
        return float(self.raw_moments[0, 0])

    def _t(self, k: int) -> np.ndarray:
        n = poly_dim(k)
        return self.transform[:n, :n]

    @cached_property
    def _t_inv(self) -> np.ndarray:
        return sla.solve_triangular(self.transform, np.eye(self.dim))

    def scaled(self, points) -> tuple[np.ndarray, np.ndarray]:
        p = (np.asarray(points, dtype=float).reshape(-1, 2) - self.center) @ self.frame.T
        return p[:, 0], p[:, 1]

    def _raw_eval(self, points, k: int) -> np.ndarray:
        xi, eta = self.scaled(points)
        e = exponents(k)
        xp = xi[:, None] ** np.arange(k + 1)
        yp = eta[:, None] ** np.arange(k + 1)
        return xp[:, e[:, 0]] * yp[:, e[:, 1]]

    def eval(self, points, k: int | None = None) -> np.ndarray:
        """(n_points, dim(k)) values of the first dim(k) basis functions."""
        k = self.k if k is None else k
        if k < 0:
            return np.zeros((len(np.asarray(points).reshape(-1, 2)), 0))
        return self._raw_eval(points, k) @ self._t(k)

    def _raw_partials(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        dxi, deta = _derivative_maps(k)
        f = self.frame
        return f[0, 0] * dxi + f[1, 0] * deta, f[0, 1] * dxi + f[1, 1] * deta

    def grad(self, points) -> np.ndarray:
        """(n_points, dim(k), 2) gradients of the basis functions."""
        raw = self._raw_eval(points, self.k - 1) if self.k > 0 else np.zeros((len(np.atleast_2d(points)), 0))
        px, py = self._raw_partials(self.k)
        t = self._t(self.k)
        return np.stack([raw @ px @ t, raw @ py @ t], axis=-1)

    def derivative_maps(self, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Coefficient maps P_k -> P_{k-1} for d/dx and d/dy, both in this basis."""
        k = self.k if k is None else k
        px, py = self._raw_partials(k)
        lo = self._t(k - 1)
        t = self._t(k)
        return (
            sla.solve_triangular(lo, px @ t) if len(lo) else px @ t,
            sla.solve_triangular(lo, py @ t) if len(lo) else py @ t,
        )

    def laplacian_map(self) -> np.ndarray:
        """(dim(k-2), dim(k)) map from P_k coefficients to those of the Laplacian."""
        px, py = self._raw_partials(self.k)
        qx, qy = self._raw_partials(self.k - 1)
        raw = qx @ px + qy @ py
        lo = self._t(self.k - 2)
        out = raw @ self._t(self.k)
        return sla.solve_triangular(lo, out) if len(lo) else out

    def _raw_mass(self, k1: int, k2: int) -> np.ndarray:
        e1, e2 = exponents(k1), exponents(k2)
        s = e1[:, None, :] + e2[None, :, :]
        return self.raw_moments[s[..., 0], s[..., 1]]

    def mass(self, k: int | None = None) -> np.ndarray:
        """Exact L2 Gram matrix of the basis functions of degree <= k."""
        k = self.k if k is None else k
        t = self._t(k)
        return t.T @ self._raw_mass(k, k) @ t

    def stiffness(self) -> np.ndarray:
        """Exact Gram matrix int_E grad b_i . grad b_j."""
        if self.k == 0:
            return np.zeros((1, 1))
        px, py = self._raw_partials(self.k)
        m = self._raw_mass(self.k - 1, self.k - 1)
        raw = px.T @ m @ px + py.T @ m @ py
        t = self._t(self.k)
        return t.T @ raw @ t

    def integrals(self, k: int | None = None) -> np.ndarray:
        """int_E b_j for the basis functions of degree <= k."""
        k = self.k if k is None else k
        e = exponents(k)
        return self.raw_moments[e[:, 0], e[:, 1]] @ self._t(k)

    def coefficients_in(self, other: "PolyBasis", k: int | None = None) -> np.ndarray:
        """X with self_j = sum_i X[i, j] other_i for j < dim(k); requires a common center."""
        k = self.k if k is None else k
        if k > min(self.k, other.k):
            raise ValueError("degree exceeds one of the bases")
        hit = self._coef_cache.get(id(other))
        if hit is None:
            if not np.allclose(self.center, other.center, rtol=0.0, atol=1e-14):
                raise ValueError("bases must share their center")
            top = min(self.k, other.k)
            a = self.frame @ np.linalg.inv(other.frame)
            s = linear_substitution(a, top)
            x = sla.solve_triangular(other._t(top), s @ self._t(top))
            x.setflags(write=False)
            # keep `other` alive so its id cannot be reused while cached
            hit = self._coef_cache[id(other)] = (other, x)
        n = poly_dim(k)
        # everything is block triangular by degree, so lower degrees are leading blocks
        return hit[1][:n, :n]

    def cross_mass(self, other: "PolyBasis", k_other: int, k: int | None = None) -> np.ndarray:
        """(dim(k), dim(k_other)) matrix int_E self_i other_j."""
        k = self.k if k is None else k
        if k + k_other > 2 * self.k:
            raise ValueError("not enough moments for this product degree")
        if k_other < 0:
            return np.zeros((poly_dim(k), 0))
        # other's raw monomials written in this basis' raw coordinates
        a = other.frame @ np.linalg.inv(self.frame)
        s = linear_substitution(a, k_other)
        return self._t(k).T @ self._raw_mass(k, k_other) @ s @ other._t(k_other)


# MonomialBasis is the name used throughout for the scaled monomials
MonomialBasis = PolyBasis


def _frame_moments(geom: ElementGeometry, frame: np.ndarray, degree: int) -> np.ndarray:
    mapped = (geom.vertices - geom.centroid) @ frame.T
    det = float(np.linalg.det(frame))
    mom = polygon_moments(mapped, degree, (0.0, 0.0), 1.0) / abs(det)
    if det < 0:
        mom = -mom  # reflected polygon is clockwise
    return mom


def monomial_basis(geom: ElementGeometry, k: int) -> PolyBasis:
    """Scaled monomials centered at the centroid and scaled by the diameter."""
    moments = polygon_moments(geom.vertices, 2 * k, geom.centroid, geom.diameter)
    moments.setflags(write=False)
    frame = np.eye(2) / geom.diameter
    return PolyBasis(k, geom.centroid, frame, np.eye(poly_dim(k)), moments, geom.diameter)


def working_basis(geom: ElementGeometry, k: int) -> PolyBasis:
    """Principal-axes monomials, orthonormalized in L2(E)/|E| (first function is 1)."""
    second = polygon_moments(geom.vertices, 2, geom.centroid, 1.0) / geom.area
    cov = np.array([[second[2, 0], second[1, 1]], [second[1, 1], second[0, 2]]])
    lam, vec = np.linalg.eigh(cov)
    if np.linalg.det(vec) < 0:
        vec[:, 0] = -vec[:, 0]
    frame = (vec / np.sqrt(np.maximum(lam, 1e-300))).T
    moments = _frame_moments(geom, frame, 2 * k)
    e = exponents(k)
    s = e[:, None, :] + e[None, :, :]
    m = moments[s[..., 0], s[..., 1]] / geom.area
    t = np.eye(len(e))
    for _ in range(2):  # a second pass restores orthonormality lost to rounding
        g = t.T @ m @ t
        c = np.linalg.cholesky(0.5 * (g + g.T))
        t = t @ sla.solve_triangular(c, np.eye(len(e)), lower=True).T
    t = np.triu(t)
    moments.setflags(write=False)
    t.setflags(write=False)
    return PolyBasis(k, geom.centroid, frame, t, moments, geom.diameter)
