"""Experiment runners behind the command line: convergence tables, the
small-edge oscillation study and the stability-constant sweep."""

from __future__ import annotations

import csv
import io
import json
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import (
    c2_probe,
    convergence_rate,
    h12_ratio,
    h1_error,
    l2_error,
    oscillation_metric,
    section_roughness,
    split_square,
)
from .exact import get_solution
from .mesh import PolyMesh, load_mesh
from .meshgen import (
    GLUED_DEFAULT,
    HEXAGON_LEVELS,
    LLOYD_ITERS,
    SQUARE_LEVELS,
    VORONOI_LEVELS,
    gen_glued,
    gen_hexagon,
    gen_square,
    gen_voronoi,
)
from .system import Discretization, assemble_discretization, discretize, pcg
from .vem import StabChoice, dof_layout, monomial_basis
from .vem.dofs import canonical_r
from .vem.stabilization import BOUNDARY_STABS, INTERNAL_STABS

COMMANDS = ("convergence", "small-edge", "stab-sweep")
CONVERGENCE_FAMILIES = ("square", "hexagon", "voronoi", "lloyd")
SWEEP_EPS = (0.5, 1e-1, 1e-2, 1e-4, 1e-6, 1e-8)
SMALL_EDGE_RUNS = (("identity", 1.0), ("tangential", 1.0), ("tangential", 0.1))


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    family: str = "square"
    mesh: str | None = None  # mesh file replacing the generated sequence
    k: int = 1
    stab: str = "identity"
    internal_stab: str = "none"
    r_op: str = "vertex"
    tau: float = 1.0
    solution: str = "paper6"
    seed: int = 0
    levels: int | None = None  # use only the first `levels` meshes of a sequence
    lloyd_iters: int | None = None
    nx: int = GLUED_DEFAULT[0]
    ny: int = GLUED_DEFAULT[1]
    ks: tuple[int, ...] = (1, 2)  # orders of the small-edge and sweep runs
    stabs: tuple[str, ...] = BOUNDARY_STABS  # stabilizations of the sweep
    eps: tuple[float, ...] = SWEEP_EPS

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.mesh is None and self.command == "convergence" and self.family not in CONVERGENCE_FAMILIES:
            raise ValueError(f"family must be one of {CONVERGENCE_FAMILIES}")
        for k in (self.k, *self.ks):
            if not 1 <= k <= 5:
                raise ValueError(f"k must lie in 1..5, got {k}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        for s in (self.stab, *self.stabs):
            if s not in BOUNDARY_STABS:
                raise ValueError(f"unknown stabilization {s!r}")
        if self.internal_stab not in INTERNAL_STABS:
            raise ValueError(f"unknown internal stabilization {self.internal_stab!r}")
        orders = (self.k,) if self.command == "convergence" else self.ks
        if canonical_r(self.r_op) == "cell" and min(orders) < 2:
            raise ValueError("the cell-average operator needs k >= 2")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if any(not 0.0 < e <= 0.5 for e in self.eps):
            raise ValueError("eps values must lie in (0, 1/2]")
        get_solution(self.solution)  # validates the selector

    def choice(self, stab: str | None = None, tau: float | None = None) -> StabChoice:
        return StabChoice(
            boundary=stab or self.stab,
            internal=self.internal_stab,
            r_operator=self.r_op,
            tau=self.tau if tau is None else tau,
        )


@dataclass
class Table:
    """A CSV table with '#' header comments."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for c in self.comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else repr(float(v))
    return str(v)


def build_id() -> str:
    """git describe of the source tree, or the package version outside a checkout."""
    from . import __version__

    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return f"vemlab-{__version__}"
    tag = out.stdout.strip()
    return f"vemlab-{__version__}-{tag}" if out.returncode == 0 and tag else f"vemlab-{__version__}"


def _header(config: ExperimentConfig) -> list[str]:
    return [f"vemlab {config.command}", f"config: {json.dumps(asdict(config), sort_keys=True)}", f"build: {build_id()}"]


# ---------------------------------------------------------------------------
# mesh sequences


def mesh_sequence(family: str, seed: int = 0, lloyd_iters: int | None = None, levels: int | None = None):
    """(label, mesh) pairs of a convergence family, coarse to fine."""
    if family == "square":
        specs = [(f"{n}x{n}", lambda n=n: gen_square(n)) for n in SQUARE_LEVELS]
    elif family == "hexagon":
        specs = [(f"{nx}x{ny}", lambda p=(nx, ny): gen_hexagon(*p)) for nx, ny in HEXAGON_LEVELS]
    elif family in ("voronoi", "lloyd"):
        iters = lloyd_iters if lloyd_iters is not None else (LLOYD_ITERS if family == "lloyd" else 0)
        specs = [(f"{n}", lambda n=n: gen_voronoi(n, seed, iters)) for n in VORONOI_LEVELS]
    else:
        raise ValueError(f"unknown family {family!r}")
    for label, make in specs[:levels]:
        yield label, make()


@dataclass(frozen=True)
class SolveResult:
    discretization: Discretization
    u_h: np.ndarray
    iterations: int


def solve_problem(mesh: PolyMesh, k: int, choice: StabChoice, solution: str = "paper6") -> SolveResult:
    """Assemble and solve -Laplace u = f with u = u_ex on the boundary."""
    sol = get_solution(solution)
    disc = discretize(mesh, k, choice)
    system = assemble_discretization(disc, sol.f, sol.u)
    if len(system.free):
        res = pcg(system.matrix, system.rhs)
        x, its = res.x, res.iterations
    else:
        x, its = np.zeros(0), 0
    return SolveResult(disc, system.expand(x), its)


# ---------------------------------------------------------------------------
# runners


CONVERGENCE_COLUMNS = ("family", "refinement", "cells", "h", "dofs", "iterations", "h1_error", "l2_error", "rate")


def run_convergence(config: ExperimentConfig, meshes: Sequence[tuple[str, PolyMesh]] | None = None) -> Table:
    """H1 error through Pi0_{k-1} grad u_h against the mean diameter, one row per mesh."""
    sol = get_solution(config.solution)
    if meshes is None:
        if config.mesh is not None:
            meshes = [(Path(config.mesh).name, load_mesh(config.mesh))]
        else:
            meshes = list(mesh_sequence(config.family, config.seed, config.lloyd_iters, config.levels))
    family = "file" if config.mesh is not None else config.family
    table = Table(CONVERGENCE_COLUMNS, comments=_header(config))
    hs, errs = [], []
    for label, mesh in meshes:
        out = solve_problem(mesh, config.k, config.choice(), config.solution)
        e1 = h1_error(out.discretization, out.u_h, sol.grad)
        e0 = l2_error(out.discretization, out.u_h, sol.u)
        hs.append(mesh.mean_diameter())
        errs.append(e1)
        rate = convergence_rate(errs[-2:], hs[-2:])[0] if len(errs) > 1 else float("nan")
        table.rows.append((family, label, mesh.n_cells, hs[-1], out.discretization.n_dofs, out.iterations, e1, e0, rate))
    return table


SMALL_EDGE_COLUMNS = ("stab", "tau", "k", "oscillation_metric", "roughness", "h1_error")


def run_small_edge(config: ExperimentConfig, mesh: PolyMesh | None = None) -> Table:
    """Error of u_h along x = 1/2 on the glued mesh for the stabilization/tau matrix.

    oscillation_metric is the max deviation from u_ex on the section;
    roughness isolates local wiggles of the nodal error (see section_roughness).
    """
    sol = get_solution(config.solution)
    if mesh is None:
        mesh = load_mesh(config.mesh) if config.mesh is not None else gen_glued(config.nx, config.ny)
    table = Table(SMALL_EDGE_COLUMNS, comments=_header(config))
    for k in config.ks:
        for stab, tau in SMALL_EDGE_RUNS:
            out = solve_problem(mesh, k, config.choice(stab, tau), config.solution)
            osc = oscillation_metric(out.discretization, out.u_h, sol.u, 0.5)
            try:
                rough = section_roughness(out.discretization, out.u_h, sol.u, 0.5)
            except ValueError:  # x = 1/2 is not made of mesh edges
                rough = float("nan")
            e1 = h1_error(out.discretization, out.u_h, sol.grad)
            table.rows.append((stab, tau, k, osc, rough, e1))
    return table


SWEEP_COLUMNS = ("eps", "stab", "k", "c2_hat", "h12_ratio", "log_factor")


def run_stability_sweep(config: ExperimentConfig) -> Table:
    """C2-hat probe and H^{1/2} ratio on a unit square with one edge split at eps.

    The first row of each (stab, k) block is the unsplit square (eps written as 'none').
    """
    table = Table(SWEEP_COLUMNS, comments=_header(config))
    for k in config.ks:
        ratios = {eps: h12_ratio(split_square(eps), k) for eps in (None, *config.eps)}
        for stab in config.stabs:
            choice = config.choice(stab)
            for eps in (None, *config.eps):
                geom = split_square(eps)
                probe = c2_probe(geom, dof_layout(geom, k), monomial_basis(geom, k), choice, with_h12=False)
                label = "none" if eps is None else eps
                table.rows.append((label, stab, k, probe.c2_hat, ratios[eps], geom.log_factor))
    return table


def run(config: ExperimentConfig) -> Table:
    if config.command == "convergence":
        return run_convergence(config)
    if config.command == "small-edge":
        return run_small_edge(config)
    return run_stability_sweep(config)
