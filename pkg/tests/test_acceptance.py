"""Acceptance criteria 1-8. Each test records one PASS/FAIL line in the run summary."""

import math
import time

import numpy as np
import pytest

from conftest import glued, hexagon, square, voronoi
from oracles import U_EX_H1_SQ, X_TRACE_H12_SQ, square_k1_oracle
from vemlab.diagnostics import (
    c2_probe,
    convergence_rate,
    h1_error,
    h12_ratio,
    h12_seminorm_sq,
    kernel_dimension,
    reproduction_errors,
    split_square,
)
from vemlab.exact import REFERENCE, polynomial_solution
from vemlab.experiments import SWEEP_EPS, ExperimentConfig, run_small_edge
from vemlab.meshgen import (
    HEXAGON_LEVELS,
    LLOYD_ITERS,
    SQUARE_LEVELS,
    VORONOI_LEVELS,
    GenSpec,
    central_edge,
    generate,
    split_edge,
)
from vemlab.quadrature import gauss_legendre, gauss_lobatto, polygon_rule, triangle_rule
from vemlab.system import SolverError, assemble_discretization, discretize, solve
from vemlab.vem import StabChoice, build_element, dof_layout, monomial_basis

SEED = 0
ORDERS = (1, 2, 3, 4, 5)
BOUNDARY = ("identity", "tangential", "l2edge")


def _r_choices(k):
    return ("cell", "boundary", "vertex") if k >= 2 else ("boundary", "vertex")


def family_meshes(family):
    """The refinement sequences used by the convergence criterion, coarse to fine."""
    if family == "square":
        return [square(n) for n in SQUARE_LEVELS]
    if family == "hexagon":
        return [hexagon(*p) for p in HEXAGON_LEVELS[:3]]
    iters = LLOYD_ITERS if family == "lloyd" else 0
    return [voronoi(n, SEED, iters) for n in VORONOI_LEVELS[:3]]


FAMILIES = ("square", "hexagon", "voronoi", "lloyd")


def coarsest(family):
    if family == "square":
        return square(SQUARE_LEVELS[0])
    if family == "hexagon":
        return hexagon(*HEXAGON_LEVELS[0])
    return voronoi(VORONOI_LEVELS[0], SEED, LLOYD_ITERS if family == "lloyd" else 0)


def _solve(mesh, k, choice, sol=REFERENCE):
    disc = discretize(mesh, k, choice)
    u = solve(assemble_discretization(disc, sol.f, sol.u))
    return disc, u


def test_criterion_1_patch_test(acceptance):
    meshes = {family: coarsest(family) for family in FAMILIES}
    start = time.perf_counter()
    worst, where = 0.0, None
    for family, mesh in meshes.items():
        for k in ORDERS:
            sol = polynomial_solution(k)
            for stab in BOUNDARY:
                for r in _r_choices(k):
                    disc, u = _solve(mesh, k, StabChoice(stab, "none", r), sol)
                    err = h1_error(disc, u, sol.grad)
                    if err > worst:
                        worst, where = err, (family, k, stab, r)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 30.0
    acceptance(1, "patch test", ok, f"max H1 error {worst:.2e} at {where}; {elapsed:.1f} s")
    assert worst <= 1e-8
    assert elapsed < 30.0


def test_criterion_2_convergence_rates(acceptance):
    start = time.perf_counter()
    rows, failures = [], []
    for family in FAMILIES:
        meshes = family_meshes(family)[-2:]
        hs = [m.mean_diameter() for m in meshes]
        for k in (1, 2, 5):
            for stab in ("identity", "tangential"):
                errs = [h1_error(*_solve(m, k, StabChoice(stab, "none")), REFERENCE.grad) for m in meshes]
                rate = convergence_rate(errs, hs)[0]
                rows.append(f"{family} k={k} {stab}: {rate:.3f}")
                if rate < k - 0.2:
                    failures.append(rows[-1])
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 600.0
    detail = f"finest-pair rates [{'; '.join(rows)}]; below k-0.2: {failures or 'none'}; {elapsed:.0f} s"
    acceptance(2, "convergence rates", ok, detail)
    assert not failures, failures
    assert elapsed < 600.0


def test_criterion_3_small_edge_robustness(acceptance):
    base = square(8)
    cell, edge = central_edge(base)
    worst, spd = 0.0, True
    for k in (1, 2):
        for stab in ("identity", "tangential"):
            choice = StabChoice(stab, "none")
            ref = h1_error(*_solve(base, k, choice), REFERENCE.grad)
            for eps in (1e-2, 1e-4, 1e-8):
                try:
                    err = h1_error(*_solve(split_edge(base, cell, edge, eps), k, choice), REFERENCE.grad)
                except SolverError:
                    spd = False
                    continue
                worst = max(worst, abs(err - ref) / ref)
    ok = spd and worst <= 0.05
    acceptance(3, "small-edge robustness", ok, f"CG converged everywhere: {spd}; max relative H1 change {worst:.2%}")
    assert spd and worst <= 0.05


def test_criterion_4_stability_uniformity(acceptance):
    details, ok = [], True
    for k in (1, 2):
        c2 = []
        for eps in SWEEP_EPS:
            g = split_square(eps)
            probe = c2_probe(g, dof_layout(g, k), monomial_basis(g, k), StabChoice("tangential", "none"), with_h12=False)
            c2.append(probe.c2_hat)
        spread = max(c2) / min(c2)
        ok &= spread <= 1.5
        ref = h12_ratio(split_square(1e-2), k) / split_square(1e-2).log_factor
        norm = [h12_ratio(split_square(e), k) / split_square(e).log_factor / ref for e in (1e-4, 1e-6, 1e-8)]
        ok &= all(0.5 <= v <= 2.0 for v in norm)
        details.append(f"k={k}: tangential C2 max/min {spread:.3f}, identity log-normalized ratio vs eps=1e-2 " + ", ".join(f"{v:.2f}" for v in norm))
    acceptance(4, "stability-constant uniformity", ok, "; ".join(details))
    assert ok


def test_criterion_5_internal_stab_dropping(acceptance):
    worst, spd, details = 0.0, True, []
    for name, mesh in (("square 8x8", square(8)), ("lloyd 100", voronoi(100, SEED, LLOYD_ITERS))):
        for k in (2, 3):
            for stab in ("identity", "tangential"):
                errs = []
                for internal in ("none", "moments"):
                    disc = discretize(mesh, k, StabChoice(stab, internal))
                    system = assemble_discretization(disc, REFERENCE.f, REFERENCE.u)
                    try:
                        np.linalg.cholesky(system.matrix.toarray())
                    except np.linalg.LinAlgError:
                        spd = False
                    errs.append(h1_error(disc, solve(system), REFERENCE.grad))
                diff = abs(errs[0] - errs[1]) / errs[1]
                worst = max(worst, diff)
                details.append(f"{name} k={k} {stab}: {diff:.2%}")
    ok = spd and worst <= 0.10
    acceptance(5, "internal-stab dropping", ok, f"SPD: {spd}; relative H1 differences [{'; '.join(details)}]")
    assert ok


def test_criterion_6_oscillation_ordering(acceptance):
    table = run_small_edge(ExperimentConfig("small-edge", ks=(1, 2)), mesh=glued())
    osc = {(r[0], r[1], r[2]): r[3] for r in table.rows}
    rough = {(r[0], r[1], r[2]): r[4] for r in table.rows}
    id1, tan1, id2 = osc[("identity", 1.0, 1)], osc[("tangential", 0.1, 1)], osc[("identity", 1.0, 2)]
    a, b = id1 > tan1, id2 < id1
    values = "; ".join(f"{s} tau={t} k={k}: {v:.3e} (roughness {rough[(s, t, k)]:.2e})" for (s, t, k), v in osc.items())
    acceptance(
        6,
        "oscillation ordering",
        a and b,
        f"identity k=1 > tangential tau=0.1 k=1: {a}; identity k=2 < identity k=1: {b}; {values}",
    )
    assert a, "identity k=1 should oscillate more than tangential tau=0.1"
    assert b, "identity k=2 should oscillate less than identity k=1"


def test_criterion_7_oracles(acceptance):
    pistar, ah = square_k1_oracle()
    g = split_square(None)
    el = build_element(g, 1, StabChoice("identity", "moments", "vertex"))
    e_local = max(np.abs(el.ops.PiStar - pistar).max(), np.abs(el.ops.A_h - ah).max())
    sq = g.vertices
    trace = np.stack([sq[:, 0], np.roll(sq, -1, axis=0)[:, 0]], axis=1)
    e_h12 = abs(h12_seminorm_sq(sq, trace) - X_TRACE_H12_SQ) / X_TRACE_H12_SQ
    disc = discretize(square(4), 2, StabChoice())
    seminorm = h1_error(disc, np.zeros(disc.n_dofs), REFERENCE.grad, degree=24)
    e_h1 = abs(seminorm - math.sqrt(U_EX_H1_SQ)) / math.sqrt(U_EX_H1_SQ)
    ok = e_local <= 1e-10 and e_h12 <= 5e-3 and e_h1 <= 1e-6
    acceptance(7, "oracle equivalences", ok, f"local matrices {e_local:.1e}; H^1/2 {e_h12:.1e} rel; |u_ex|_1 {e_h1:.1e} rel")
    assert ok


def _quadrature_sweep():
    worst = 0.0
    for n in range(1, 33):
        r = gauss_legendre(n)
        for d in range(2 * n):
            worst = max(worst, abs(r.weights @ r.nodes**d - (0.0 if d % 2 else 2.0 / (d + 1))))
    for n in range(2, 13):
        r = gauss_lobatto(n)
        for d in range(2 * n - 2):
            worst = max(worst, abs(r.weights @ r.nodes**d - (0.0 if d % 2 else 2.0 / (d + 1))))
    for deg in range(13):
        r = triangle_rule((0, 0), (1, 0), (0, 1), deg)
        p = polygon_rule(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float), deg)
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                tri = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
                worst = max(worst, abs(r.weights @ (r.points[:, 0] ** a * r.points[:, 1] ** b) - tri))
                worst = max(worst, abs(p.weights @ (p.points[:, 0] ** a * p.points[:, 1] ** b) - 1 / ((a + 1) * (b + 1))))
    return worst


def test_criterion_8_property_suites(acceptance):
    quad = _quadrature_sweep()
    coef, vals, where = 0.0, 0.0, None
    for family in FAMILIES:
        for mesh in family_meshes(family):
            for c in range(mesh.n_cells):
                geom = mesh.geometry(c)
                for k in ORDERS:
                    for e in reproduction_errors(geom, k):
                        vals = max(vals, e.values)
                        if e.coefficients > coef:
                            coef, where = e.coefficients, (family, mesh.n_cells, c, k, e.r_operator)
    kernels = set()
    for family in FAMILIES:
        mesh = coarsest(family)
        for c in range(mesh.n_cells):
            geom = mesh.geometry(c)
            for k in ORDERS:
                for stab in BOUNDARY:
                    for internal in ("moments", "none"):
                        kernels.add(kernel_dimension(build_element(geom, k, StabChoice(stab, internal))))
    specs = [
        GenSpec("square", n=4),
        GenSpec("hexagon", nx=8, ny=10),
        GenSpec("voronoi", n=25, seed=7),
        GenSpec("lloyd", n=25, seed=7, lloyd_iters=10),
        GenSpec("glued", nx=53, ny=58),
        GenSpec("edge_split", n=8, eps=1e-8),
    ]
    determinism = all(
        np.array_equal(a.vertices, b.vertices) and a.cells == b.cells for a, b in ((generate(s), generate(s)) for s in specs)
    )
    parts = {
        "quadrature": quad <= 1e-12,
        "reproduction": coef <= 1e-10,
        "kernel": kernels == {1},
        "determinism": determinism,
    }
    detail = (
        f"quadrature max error {quad:.1e}; reproduction max coefficient error {coef:.1e} at {where} "
        f"(max pointwise error {vals:.1e}); kernel dimensions {sorted(kernels)}; determinism {determinism}; "
        f"failing parts: {[k for k, v in parts.items() if not v] or 'none'}"
    )
    acceptance(8, "property suites", all(parts.values()), detail)
    assert parts["quadrature"] and parts["kernel"] and parts["determinism"]
    assert parts["reproduction"], f"coefficient reproduction error {coef:.2e} at {where}"
