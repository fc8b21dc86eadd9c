"""Gauss rules on [-1, 1] and polygon quadrature.

1D rules are computed by Newton iteration on the three-term Legendre
recurrence and cached per (kind, n). Polygon rules fan-triangulate the cell
from a center point and push a collapsed (Duffy) Gauss product rule onto each
triangle, so they are exact for bivariate polynomials up to the requested
degree as long as every fan triangle has positive area.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_LEGENDRE_POINTS = 32
_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 100


class QuadratureError(ValueError):
    """Raised for unsupported rule sizes or degenerate integration domains."""


@dataclass(frozen=True)
class QuadRule1D:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def on_interval(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights mapped affinely to [a, b]."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


@dataclass(frozen=True)
class QuadRule2D:
    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract sampled values (first axis = points) against the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def legendre_eval(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (P_n(x), P_{n-1}(x)) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for j in range(1, n):
        p_prev, p = p, ((2 * j + 1) * x * p - j * p_prev) / (j + 1)
    return p, p_prev


def _freeze(nodes: np.ndarray, weights: np.ndarray) -> QuadRule1D:
    order = np.argsort(nodes)
    nodes = nodes[order]
    weights = weights[order]
    # exact mirror symmetry keeps shared-edge points identical for both cells
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule1D(nodes, weights)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadRule1D:
    """n-point Gauss-Legendre rule, exact for degree 2n - 1."""
    if not 1 <= n <= MAX_LEGENDRE_POINTS:
        raise QuadratureError(f"Gauss-Legendre needs 1 <= n <= {MAX_LEGENDRE_POINTS}, got {n}")
    i = np.arange(n)
    x = np.cos(np.pi * (i + 0.75) / (n + 0.5))
    for _ in range(_NEWTON_MAXIT):
        p, p_prev = legendre_eval(n, x)
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    p, p_prev = legendre_eval(n, x)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return _freeze(x, w)


@lru_cache(maxsize=None)
def gauss_lobatto(n: int) -> QuadRule1D:
    """n-point Gauss-Lobatto rule: endpoints plus the roots of P'_{n-1}.

    Exact for polynomials of degree 2n - 3.
    """
    if n < 2:
        raise QuadratureError(f"Gauss-Lobatto needs n >= 2, got {n}")
    if n == 2:
        return _freeze(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    deg = n - 1
    x = np.cos(np.pi * np.arange(n) / deg)
    for _ in range(_NEWTON_MAXIT):
        p, p_prev = legendre_eval(deg, x)
        dx = (x * p - p_prev) / (n * p)
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    p, _ = legendre_eval(deg, x)
    w = 2.0 / (deg * n * p * p)
    return _freeze(x, w)


@lru_cache(maxsize=None)
def _duffy_reference(degree: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # s carries the collapse Jacobian, hence one extra degree in that direction
    ns = max(1, (degree + 3) // 2)
    nt = max(1, (degree + 2) // 2)
    s, ws = gauss_legendre(ns).on_interval(0.0, 1.0)
    t, wt = gauss_legendre(nt).on_interval(0.0, 1.0)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * S
    return S.ravel(), T.ravel(), W.ravel()


def triangle_rule(a, b, c, degree: int) -> QuadRule2D:
    """Collapsed Gauss product rule on triangle (a, b, c), exact to `degree`."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    s, t, w = _duffy_reference(degree)
    twice_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if twice_area <= 0.0:
        raise QuadratureError("triangle with non-positive area")
    pts = a + s[:, None] * ((b - a) + t[:, None] * (c - b))
    return QuadRule2D(pts, w * twice_area)


def polygon_rule(vertices, degree: int, center=None) -> QuadRule2D:
    """Fan quadrature over a polygon given by CCW `vertices`.

    The fan is built from `center` (default: the area centroid). Raises
    QuadratureError if a fan triangle is degenerate or inverted, which means
    the polygon is not star-shaped with respect to the center.
    """
    verts = np.asarray(vertices, dtype=float)
    if center is None:
        from .mesh import polygon_area_centroid

        _, center = polygon_area_centroid(verts)
    c = np.asarray(center, dtype=float)
    s, t, w = _duffy_reference(degree)
    p = verts - c
    q = np.roll(verts, -1, axis=0) - c
    twice_area = p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]
    if np.any(twice_area <= 0.0):
        bad = int(np.argmin(twice_area))
        raise QuadratureError(
            f"fan triangle {bad} has non-positive area; "
            "the cell is not star-shaped with respect to its centroid"
        )
    # (n_tri, n_ref, 2)
    pts = c + s[None, :, None] * (p[:, None, :] + t[None, :, None] * (q - p)[:, None, :])
    wts = twice_area[:, None] * w[None, :]
    return QuadRule2D(pts.reshape(-1, 2), wts.ravel())


def polygon_moments(vertices, degree: int, center=(0.0, 0.0), scale: float = 1.0) -> np.ndarray:
    """Exact integrals of scaled monomials over a polygon.

    Returns I with I[a, b] = integral over the polygon of
    ((x - cx)/scale)**a * ((y - cy)/scale)**b  for a + b <= degree
    (entries with a + b > degree are zero). Uses the divergence theorem,
    int_E xi^a eta^b = 1/(a+1) * sum_e int_e xi^(a+1) eta^b d(eta), with a
    Gauss-Legendre rule on each edge that is exact for the edge integrand.
    """
    verts = (np.asarray(vertices, dtype=float) - np.asarray(center, dtype=float)) / scale
    nxt = np.roll(verts, -1, axis=0)
    rule = gauss_legendre((degree + 1) // 2 + 1)  # edge integrand has degree degree + 1
    t, wt = rule.on_interval(0.0, 1.0)
    # points (n_edges, n_q, 2)
    pts = verts[:, None, :] + t[None, :, None] * (nxt - verts)[:, None, :]
    deta = (nxt[:, 1] - verts[:, 1])[:, None] * wt[None, :]
    xi = pts[..., 0].ravel()
    eta = pts[..., 1].ravel()
    dw = deta.ravel()
    xi_pow = xi[None, :] ** np.arange(1, degree + 2)[:, None]
    eta_pow = eta[None, :] ** np.arange(0, degree + 1)[:, None]
    out = np.zeros((degree + 1, degree + 1))
    for a in range(degree + 1):
        top = degree - a
        out[a, : top + 1] = (eta_pow[: top + 1] * (xi_pow[a] * dw)[None, :]).sum(axis=1) / (a + 1)
    return out * scale**2
