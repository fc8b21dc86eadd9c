"""Error norms, convergence rates and numerical probes of the stability constants."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .mesh import ElementGeometry, PolyMesh, polygon_geometry
from .quadrature import gauss_legendre, gauss_lobatto, polygon_rule
from .system import Discretization
from .vem import (
    StabChoice,
    VemElement,
    dof_layout,
    dof_matrix,
    monomial_basis,
    r_functional,
    stab_matrix,
    working_basis,
)
from .vem.basis import MonomialBasis
from .vem.dofs import R_CHOICES, DofLayout
from .vem.element import pi_nabla_work


class ProbeError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# error norms


@dataclass(frozen=True)
class ErrorReport:
    h1: float  # broken H1 seminorm error through Pi0_{k-1} grad u_h
    l2: float  # L2 error of Pi-nabla u_h
    h: float  # mean cell diameter
    n_dofs: int


def _local_dofs(disc: Discretization, u_h: np.ndarray):
    u_h = np.asarray(u_h, dtype=float)
    if u_h.shape != (disc.n_dofs,):
        raise ValueError(f"expected {disc.n_dofs} dofs, got shape {u_h.shape}")
    for el, dofs in zip(disc.elements, disc.dofmap.cell_dofs):
        yield el, u_h[dofs]


def h1_error(disc: Discretization, u_h, grad_exact, degree: int | None = None) -> float:
    """sqrt(sum_E int_E |grad u - Pi0_{k-1} grad u_h|^2), degree 2k+6 quadrature by default."""
    deg = 2 * disc.k + 6 if degree is None else degree
    total = 0.0
    for el, d in _local_dofs(disc, u_h):
        rule = polygon_rule(el.geom.vertices, deg, el.geom.centroid)
        gx, gy = el.pi0_grad_values(rule.points, d)
        ex, ey = grad_exact(rule.points[:, 0], rule.points[:, 1])
        total += float(rule.weights @ ((ex - gx) ** 2 + (ey - gy) ** 2))
    return math.sqrt(total)


def l2_error(disc: Discretization, u_h, u_exact, degree: int | None = None) -> float:
    """sqrt(sum_E int_E (u - Pi-nabla u_h)^2)."""
    deg = 2 * disc.k + 6 if degree is None else degree
    total = 0.0
    for el, d in _local_dofs(disc, u_h):
        rule = polygon_rule(el.geom.vertices, deg, el.geom.centroid)
        vals = el.pi_nabla_values(rule.points, d)
        ex = u_exact(rule.points[:, 0], rule.points[:, 1])
        total += float(rule.weights @ (ex - vals) ** 2)
    return math.sqrt(total)


def error_report(disc: Discretization, u_h, u_exact, grad_exact) -> ErrorReport:
    return ErrorReport(
        h1_error(disc, u_h, grad_exact),
        l2_error(disc, u_h, u_exact),
        disc.mesh.mean_diameter(),
        disc.n_dofs,
    )


def convergence_rate(errors: Sequence[float], hs: Sequence[float]) -> list[float]:
    """Observed orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}); +inf where e_{i+1} = 0."""
    if len(errors) != len(hs):
        raise ValueError("errors and hs must have the same length")
    if len(errors) < 2:
        raise ValueError("need at least two refinement levels")
    rates = []
    for (e0, e1), (h0, h1) in zip(itertools.pairwise(errors), itertools.pairwise(hs)):
        if not h0 > h1 > 0:
            raise ValueError("mesh sizes must be positive and strictly decreasing")
        if e1 == 0.0:
            rates.append(math.inf)
        elif e0 == 0.0:
            rates.append(-math.inf)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


# ---------------------------------------------------------------------------
# local stability constants


def triple_norm_sq(el: VemElement, dofs, r_operator: str | None = None) -> float:
    """s_E((I - R) v, (I - R) v) + a_E(Pi v, Pi v) for a local dof vector."""
    d = np.asarray(dofs, dtype=float)
    r = r_functional(el.geom, el.layout, r_operator or "vertex")
    shifted = d - r @ d
    s = el.ops.S_boundary + el.ops.S_internal
    piw = el.ops.PiStar if el.ops.PiWork is None else el.ops.PiWork
    pi = piw @ d
    return float(shifted @ s @ shifted + el.ops.K_E * pi @ el.solve_basis.stiffness() @ pi)


def _complement_grams(geom, layout, basis, choice: StabChoice, K: float, dof_basis=None):
    # Grams of s_E((I-R)p, (I-R)p) and K a_E(p, p) over basis functions 1.. (all but the constant)
    d = dof_matrix(layout, basis, dof_basis)[:, 1:]
    r = r_functional(geom, layout, choice.r_operator)
    c = d - np.outer(np.ones(layout.n_dofs), r @ d)
    sb, si = stab_matrix(geom, layout, choice, K)
    s = c.T @ (sb + si) @ c
    a = K * basis.stiffness()[1:, 1:]
    return 0.5 * (s + s.T), 0.5 * (a + a.T)


def generalized_extremes(s: np.ndarray, a: np.ndarray, tol: float = 1e-8) -> tuple[float, float, float]:
    """(lambda_min, lambda_max, residual) of s x = lambda a x with a SPD."""
    lam, vec = sla.eigh(s, a)
    scale = max(np.abs(s).max(), np.abs(a).max() * max(abs(lam[-1]), 1.0), 1e-300)
    res = 0.0
    for j in (0, -1):
        v = vec[:, j]
        res = max(res, float(np.linalg.norm(s @ v - lam[j] * (a @ v)) / (scale * np.linalg.norm(v))))
    if not res <= tol:
        raise ProbeError(f"generalized eigenproblem residual {res:.2e} exceeds {tol:.0e}")
    return float(lam[0]), float(lam[-1]), res


@dataclass(frozen=True)
class StabilityProbe:
    c2_hat: float  # largest eigenvalue of s_E((I-R)p,(I-R)p) against a_E(p,p), p in P_k / R
    c2: float  # the same for |||p|||^2, i.e. 1 + c2_hat
    h12_ratio: float  # max of |v|^2_{1/2} / ||v||^2_inf over nodal piecewise-linear traces
    log_factor: float
    residual: float


def c2_probe(
    geom: ElementGeometry,
    layout: DofLayout,
    basis: MonomialBasis,
    choice: StabChoice,
    K: float = 1.0,
    with_h12: bool = True,
    conditioned: bool = True,
) -> StabilityProbe:
    """Probe of the constant C2 on P_k; with `conditioned` the Grams use the working basis."""
    if layout.k < 1 or basis.dim < 2:
        raise ValueError("the probe needs k >= 1")
    if conditioned:
        s, a = _complement_grams(geom, layout, working_basis(geom, layout.k), choice, K, basis)
    else:
        s, a = _complement_grams(geom, layout, basis, choice, K)
    _, lam_max, res = generalized_extremes(s, a)
    lam_max = max(lam_max, 0.0)
    ratio = h12_ratio(geom, layout.k) if with_h12 else math.nan
    return StabilityProbe(lam_max, 1.0 + lam_max, ratio, geom.log_factor, res)


def stability_sandwich(el: VemElement) -> tuple[float, float]:
    """(c1, c2) with c1 p'A_h p <= K |p|_1^2 <= c2 p'A_h p on P_k modulo constants."""
    work = el.solve_basis
    d = dof_matrix(el.layout, work, None if work is el.basis else el.basis)[:, 1:]
    ah = d.T @ el.ops.A_h @ d
    a = el.ops.K_E * work.stiffness()[1:, 1:]
    lo, hi, _ = generalized_extremes(0.5 * (a + a.T), 0.5 * (ah + ah.T))
    return lo, hi


def balanced_stiffness(el: VemElement) -> np.ndarray:
    """A_h with internal moments taken against the working basis, then Jacobi scaled.

    Internal moments against scaled monomials are nearly dependent on stretched
    cells, which makes a plain eigenvalue threshold meaningless; this change of
    dof coordinates removes that artificial scale spread.
    """
    a = el.ops.A_h
    lay = el.layout
    c = np.eye(lay.n_dofs)
    if lay.n_internal and el.work is not None:
        y = el.work.coefficients_in(el.basis, lay.k - 2)
        c[lay.n_boundary :, lay.n_boundary :] = y.T
    ci = np.linalg.inv(c)
    b = ci.T @ a @ ci
    s = 1.0 / np.sqrt(np.diag(b))
    b = s[:, None] * b * s[None, :]
    return 0.5 * (b + b.T)


def kernel_dimension(el: VemElement, rel_tol: float = 1e-10) -> int:
    """Number of eigenvalues of the balanced A_h below rel_tol times the largest."""
    ev = np.linalg.eigvalsh(balanced_stiffness(el))
    return int(np.sum(ev < rel_tol * ev[-1]))


@dataclass(frozen=True)
class ReproductionError:
    r_operator: str
    coefficients: float  # max |Pi(dofs(m_a)) - e_a| over scaled-monomial coefficients
    values: float  # max |Pi(dofs(m_a)) - m_a| at the vertices and quadrature points


def reproduction_errors(geom: ElementGeometry, k: int, r_operators: Sequence[str] = R_CHOICES):
    """How far Pi-nabla is from the identity on P_k, one entry per averaging operator.

    Operators that need a larger k (the cell average at k = 1) are skipped.
    """
    layout = dof_layout(geom, k)
    basis = monomial_basis(geom, k)
    work = working_basis(geom, k)
    dm = dof_matrix(layout, basis)
    to_m = work.coefficients_in(basis)
    pts = np.vstack([geom.vertices, polygon_rule(geom.vertices, 2 * k, geom.centroid).points])
    exact = basis.eval(pts)
    w_at = work.eval(pts)
    out = []
    for r in r_operators:
        choice = StabChoice(r_operator=r)
        if choice.r_operator == "cell" and k < 2:
            continue
        piw, _ = pi_nabla_work(geom, layout, basis, work, choice)
        coef = piw @ dm
        err_c = float(np.abs(to_m @ coef - np.eye(basis.dim)).max())
        err_v = float(np.abs(w_at @ coef - exact).max())
        out.append(ReproductionError(choice.r_operator, err_c, err_v))
    return out


# ---------------------------------------------------------------------------
# H^{1/2} boundary seminorm
#
# The double integral uses the Euclidean distance |x(s1) - x(s2)| in the
# denominator. Pairs of points on one straight segment are integrated exactly
# through the divided difference of the trace polynomial; pairs on different
# segments go through panels graded geometrically toward the segment ends,
# with a Duffy split at every shared corner.


def _trace_coefficients(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # values (S, p+1, m) at the Lobatto nodes of [0, 1]; return monomial
    # coefficients in t measured from the start and from the end of each segment
    p = values.shape[1] - 1
    t = 0.5 * (gauss_lobatto(p + 1).nodes + 1.0) if p >= 1 else np.zeros(1)
    vand = t[:, None] ** np.arange(p + 1)
    inv = np.linalg.inv(vand)
    start = np.einsum("ij,sjm->sim", inv, values)
    end = np.einsum("ij,sjm->sim", inv, values[:, ::-1, :])
    return start, end


def _poly(coef: np.ndarray, t: np.ndarray) -> np.ndarray:
    # coef (p+1, m), t (...) -> (..., m)
    return (t[..., None] ** np.arange(len(coef))) @ coef


def _panels(lengths: np.ndarray, grading: float = 2.0) -> list[np.ndarray]:
    s = len(lengths)
    out = []
    for i in range(s):
        L = lengths[i]
        bps = {0.0, 0.5, 1.0}
        for nb, from_end in ((lengths[i - 1], False), (lengths[(i + 1) % s], True)):
            sigma = 0.5 * min(nb, L) / L
            while sigma < 0.5:
                bps.add(1.0 - sigma if from_end else sigma)
                sigma *= grading
        out.append(np.array(sorted(bps)))
    return out


def h12_gram(vertices, values, n: int = 16) -> np.ndarray:
    """Gram matrix of the H^{1/2} double-integral form for m traces at once.

    vertices: (S, 2) corners of a closed chain of straight segments, segment
    i running from vertices[i] to vertices[i+1]. values: (S, p+1, m) trace
    values at the p+1 Gauss-Lobatto nodes of each segment (first and last
    node are the segment ends). Returns G with v' G v = |v|^2_{1/2}.
    """
    verts = np.asarray(vertices, dtype=float)
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    S, p1, m = vals.shape
    if S != len(verts) or p1 < 2:
        raise ValueError("values must have shape (n_segments, p+1, m) with p >= 1")
    ends = np.roll(vals[:, 0, :], -1, axis=0)
    scale = max(np.abs(vals).max(), 1.0)
    if np.abs(vals[:, -1, :] - ends).max() > 1e-9 * scale:
        raise ValueError("boundary trace is discontinuous at a corner")
    p = p1 - 1
    nxt = np.roll(verts, -1, axis=0)
    vec = nxt - verts
    lengths = np.hypot(vec[:, 0], vec[:, 1])
    if np.any(lengths <= 0.0):
        raise ValueError("zero-length segment in boundary chain")
    direc = vec / lengths[:, None]
    c_start, c_end = _trace_coefficients(vals)
    gram = np.zeros((m, m))

    # same segment: (v(t1) - v(t2)) / (t1 - t2) is a polynomial q(t1, t2)
    gq = gauss_legendre(max(p, 1))
    g, w = 0.5 * (gq.nodes + 1.0), 0.5 * gq.weights
    t1, t2 = np.meshgrid(g, g, indexing="ij")
    ww = np.outer(w, w).ravel()
    basis_q = np.zeros((p + 1, t1.size))
    for deg in range(1, p + 1):
        basis_q[deg] = sum(t1.ravel() ** i * t2.ravel() ** (deg - 1 - i) for i in range(deg))
    for sgm in range(S):
        q = basis_q.T @ c_start[sgm]  # (nq, m)
        gram += (q * ww[:, None]).T @ q

    # panels on every segment
    gl = gauss_legendre(n)
    x, wx = 0.5 * (gl.nodes + 1.0), 0.5 * gl.weights
    breaks = _panels(lengths)
    pts, wts, pv, seg_of, first, last = [], [], [], [], [], []
    for sgm, bps in enumerate(breaks):
        for j in range(len(bps) - 1):
            a, b = bps[j], bps[j + 1]
            t = a + (b - a) * x
            pts.append(verts[sgm] + t[:, None] * vec[sgm])
            wts.append((b - a) * lengths[sgm] * wx)
            pv.append(_poly(c_start[sgm], t))
            seg_of.append(sgm)
            first.append(j == 0)
            last.append(j == len(bps) - 2)
    pts = np.array(pts)  # (P, n, 2)
    wts = np.array(wts)
    pv = np.array(pv)  # (P, n, m)
    seg_of = np.array(seg_of)
    first = np.array(first)
    last = np.array(last)
    n_pan = len(seg_of)

    ia, ib = np.triu_indices(n_pan, k=1)
    keep = seg_of[ia] != seg_of[ib]
    # the corner pairs (last panel of s, first panel of s+1) are done by Duffy
    corner = (last[ia] & first[ib] & (seg_of[ib] == (seg_of[ia] + 1) % S)) | (
        last[ib] & first[ia] & (seg_of[ia] == (seg_of[ib] + 1) % S)
    )
    keep &= ~corner
    ia, ib = ia[keep], ib[keep]
    chunk = 4096
    for lo in range(0, len(ia), chunk):
        a_idx, b_idx = ia[lo : lo + chunk], ib[lo : lo + chunk]
        diff = pts[a_idx][:, :, None, :] - pts[b_idx][:, None, :, :]
        kern = wts[a_idx][:, :, None] * wts[b_idx][:, None, :] / (diff**2).sum(-1)
        va, vb = pv[a_idx], pv[b_idx]
        ra = kern.sum(axis=2)
        rb = kern.sum(axis=1)
        part = np.einsum("pi,pik,pil->kl", ra, va, va) + np.einsum("pj,pjk,pjl->kl", rb, vb, vb)
        cross = np.einsum("pik,pij,pjl->kl", va, kern, vb)
        gram += 2.0 * (part - cross - cross.T)

    # corners: segment a = s-1 ends at vertex s, segment b = s starts there
    u, z = np.meshgrid(x, x, indexing="ij")
    u, z = u.ravel(), z.ravel()
    wuz = np.outer(wx, wx).ravel()
    powers = np.arange(1, p + 1)
    for sgm in range(S):
        sa, sb = (sgm - 1) % S, sgm
        la = (1.0 - breaks[sa][-2]) * lengths[sa]
        lb = breaks[sb][1] * lengths[sb]
        da, db = -direc[sa], direc[sb]
        ca = c_end[sa][1:] * (la / lengths[sa]) ** powers[:, None]  # (p, m)
        cb = c_start[sb][1:] * (lb / lengths[sb]) ** powers[:, None]
        up = u[:, None] ** (powers - 1)
        # triangle w <= u, w = u z
        dz = la * da[None, :] - lb * z[:, None] * db[None, :]
        delta = up @ ca - (up * z[:, None] ** powers) @ cb
        wt = wuz * la * lb * u / (dz**2).sum(-1)
        gram += 2.0 * (delta * wt[:, None]).T @ delta
        # triangle u <= w, u = w z (roles of u and w swapped)
        dz = la * z[:, None] * da[None, :] - lb * db[None, :]
        delta = (up * z[:, None] ** powers) @ ca - up @ cb
        wt = wuz * la * lb * u / (dz**2).sum(-1)
        gram += 2.0 * (delta * wt[:, None]).T @ delta
    return 0.5 * (gram + gram.T)


def h12_seminorm_sq(vertices, values, n: int = 16) -> float:
    """|v|^2_{1/2} of one continuous piecewise-polynomial trace (see h12_gram)."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 3:
        raise ValueError("pass a single trace of shape (n_segments, p+1)")
    return float(h12_gram(vertices, vals[:, :, None], n)[0, 0])


def h12_seminorm(vertices, values, n: int = 16) -> float:
    return math.sqrt(max(h12_seminorm_sq(vertices, values, n), 0.0))


def element_trace(el: VemElement, dofs) -> tuple[np.ndarray, np.ndarray]:
    """(vertices, values) describing the boundary trace of a local dof vector."""
    d = np.asarray(dofs, dtype=float)
    return el.geom.vertices, d[el.layout.edge_dofs]


def boundary_nodes(geom: ElementGeometry, k: int) -> np.ndarray:
    """Vertices and edge Lobatto points of order k, in boundary order."""
    layout = dof_layout(geom, k)
    order = layout.edge_dofs[:, :-1].ravel()
    return layout.points[order]


def hat_gram(geom: ElementGeometry, k: int = 1) -> np.ndarray:
    """H^{1/2} Gram of the continuous piecewise-linear nodal hats on the order-k boundary nodes."""
    nodes = boundary_nodes(geom, k)
    nn = len(nodes)
    eye = np.eye(nn)
    values = np.stack([eye, np.roll(eye, -1, axis=0)], axis=1)  # (segments, 2, hats)
    return h12_gram(nodes, values)


def max_sign_quadratic(q: np.ndarray, exhaustive_limit: int = 16, seed: int = 0) -> float:
    """max of v'Qv over v in {-1, 1}^N; exact up to N = exhaustive_limit, local search beyond."""
    nn = len(q)
    if nn <= exhaustive_limit:
        best = -math.inf
        bits = np.arange(2 ** (nn - 1))
        for lo in range(0, len(bits), 8192):
            b = bits[lo : lo + 8192]
            v = 1.0 - 2.0 * ((b[:, None] >> np.arange(nn - 1)) & 1)
            v = np.hstack([np.ones((len(b), 1)), v])
            best = max(best, float(np.einsum("ij,jk,ik->i", v, q, v).max()))
        return best
    rng = np.random.default_rng(seed)
    _, vecs = np.linalg.eigh(q)
    starts = [np.where(vecs[:, -j] >= 0, 1.0, -1.0) for j in range(1, min(nn, 4) + 1)]
    starts += [rng.choice([-1.0, 1.0], size=nn) for _ in range(16)]
    best = -math.inf
    for v in starts:
        val = v @ q @ v
        improved = True
        while improved:
            improved = False
            qv = q @ v
            # flipping v_i changes the value by -4 v_i (Qv)_i + 4 Q_ii
            gain = -4.0 * v * qv + 4.0 * np.diag(q)
            i = int(np.argmax(gain))
            if gain[i] > 1e-14 * max(abs(val), 1.0):
                v = v.copy()
                v[i] = -v[i]
                val += gain[i]
                improved = True
        best = max(best, float(val))
    return best


def h12_ratio(geom: ElementGeometry, k: int = 1) -> float:
    """max |v|^2_{1/2} / ||v||^2_inf over continuous piecewise-linear nodal traces.

    Such a trace attains its maximum modulus at a node and the quadratic form
    is convex, so the maximum over the unit ball sits at a sign vector.
    A lower bound for the supremum over all traces of the local space.
    """
    return max_sign_quadratic(hat_gram(geom, k))


@dataclass(frozen=True)
class LogBoundRow:
    eps: float
    ratio: float
    log_factor: float

    @property
    def normalized(self) -> float:
        return self.ratio / self.log_factor


def split_square(eps: float | None) -> ElementGeometry:
    """Unit square, bottom edge split at fraction eps (None: unsplit)."""
    sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    if eps is None:
        return polygon_geometry(np.array(sq))
    if not 0.0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    return polygon_geometry(np.array([sq[0], [eps, 0.0]] + sq[1:]))


def log_bound_check(eps_sweep: Sequence[float], k: int = 1) -> list[LogBoundRow]:
    rows = []
    for eps in eps_sweep:
        geom = split_square(eps)
        rows.append(LogBoundRow(float(eps), h12_ratio(geom, k), geom.log_factor))
    return rows


# ---------------------------------------------------------------------------
# sections along a vertical line


def _edge_trace_values(disc: Discretization, u_h: np.ndarray, e: int) -> np.ndarray:
    # values at the k+1 Lobatto nodes from the lower-index vertex to the higher
    a, b = disc.mesh.edges[e]
    inner = [u_h[i] for i in disc.dofmap.edge_range(e)]
    return np.array([u_h[a], *inner, u_h[b]])


def _lagrange_eval(k: int, values: np.ndarray, t: np.ndarray) -> np.ndarray:
    nodes = 0.5 * (gauss_lobatto(k + 1).nodes + 1.0)
    coef = np.linalg.solve(nodes[:, None] ** np.arange(k + 1), values)
    return (np.asarray(t)[..., None] ** np.arange(k + 1)) @ coef


def _point_in_polygon(pt: np.ndarray, poly: np.ndarray) -> bool:
    x, y = pt
    xs, ys = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    cond = (ys > y) != (yn > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = xs + (y - ys) * (xn - xs) / (yn - ys)
    return bool(np.count_nonzero(cond & (x < xc)) % 2)


def section_sample(
    disc: Discretization,
    u_h,
    x0: float = 0.5,
    n: int = 1001,
    tol: float = 1e-12,
) -> np.ndarray:
    """(n, 2) array of (y, value) along the line x = x0.

    Where the line runs along a mesh edge the computable edge trace of u_h is
    used; elsewhere Pi-nabla u_h of the cell containing the point. A point
    that hits a vertex off such edges is nudged by 1e-12 in x.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    u_h = np.asarray(u_h, dtype=float)
    mesh = disc.mesh
    ys = np.linspace(0.0, 1.0, n)
    out = np.empty(n)
    vx = mesh.vertices
    on_line = []
    for e, (a, b) in enumerate(mesh.edges):
        if abs(vx[a, 0] - x0) <= tol and abs(vx[b, 0] - x0) <= tol:
            on_line.append((e, vx[a, 1], vx[b, 1]))
    polys = [vx[list(c)] for c in mesh.cells]
    boxes = np.array([[p[:, 0].min(), p[:, 0].max(), p[:, 1].min(), p[:, 1].max()] for p in polys])
    for i, y in enumerate(ys):
        hit = None
        for e, ya, yb in on_line:
            if min(ya, yb) - tol <= y <= max(ya, yb) + tol:
                hit = (e, ya, yb)
                break
        if hit is not None:
            e, ya, yb = hit
            t = np.clip((y - ya) / (yb - ya), 0.0, 1.0)
            out[i] = _lagrange_eval(disc.k, _edge_trace_values(disc, u_h, e), t)
            continue
        pt = np.array([x0, y])
        if np.any(np.hypot(vx[:, 0] - x0, vx[:, 1] - y) <= tol):
            pt = pt + np.array([1e-12, 0.0])
        pt = np.clip(pt, 1e-14, 1.0 - 1e-14)
        cand = np.flatnonzero(
            (boxes[:, 0] - tol <= pt[0]) & (pt[0] <= boxes[:, 1] + tol) & (boxes[:, 2] - tol <= pt[1]) & (pt[1] <= boxes[:, 3] + tol)
        )
        cell = next((c for c in cand if _point_in_polygon(pt, polys[c])), None)
        if cell is None:
            raise ValueError(f"point {pt} is not inside any cell")
        el = disc.elements[cell]
        d = u_h[disc.dofmap.cell_dofs[cell]]
        out[i] = float(el.pi_nabla_values(pt[None, :], d)[0])
    return np.column_stack([ys, out])


def oscillation_metric(disc: Discretization, u_h, u_exact, x0: float = 0.5, n: int = 2001) -> float:
    """max over the section x = x0 of |u_h - u_exact|."""
    samples = section_sample(disc, u_h, x0, n)
    exact = u_exact(np.full(len(samples), x0), samples[:, 0])
    return float(np.abs(samples[:, 1] - exact).max())


def section_roughness(disc: Discretization, u_h, u_exact, x0: float = 0.5, tol: float = 1e-12) -> float:
    """Local wiggle of the nodal error along a line x = x0 made of mesh edges.

    With e_i the error at the trace nodes on the line (vertices and edge
    Lobatto nodes, sorted by y), returns max_i |e_i - l_i| where l_i
    interpolates e_{i-1} and e_{i+1} linearly. A smooth error contributes
    O(h^2 e''); a sawtooth such as the one a small edge can trigger
    contributes its amplitude.
    """
    u_h = np.asarray(u_h, dtype=float)
    mesh = disc.mesh
    vx = mesh.vertices
    nodes = 0.5 * (gauss_lobatto(disc.k + 1).nodes + 1.0)
    ys, vals = [], []
    for e, (a, b) in enumerate(mesh.edges):
        if abs(vx[a, 0] - x0) <= tol and abs(vx[b, 0] - x0) <= tol:
            ys.extend(vx[a, 1] + nodes * (vx[b, 1] - vx[a, 1]))
            vals.extend(_edge_trace_values(disc, u_h, e))
    if len(ys) < 3:
        raise ValueError(f"the line x = {x0} does not run along mesh edges")
    ys, uniq = np.unique(np.round(np.array(ys), 14), return_index=True)
    err = np.array(vals)[uniq] - u_exact(np.full(len(ys), x0), ys)
    t = (ys[1:-1] - ys[:-2]) / (ys[2:] - ys[:-2])
    lin = (1.0 - t) * err[:-2] + t * err[2:]
    return float(np.abs(err[1:-1] - lin).max())


Field = Callable[[np.ndarray, np.ndarray], np.ndarray]
