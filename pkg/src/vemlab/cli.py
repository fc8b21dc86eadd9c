"""Command line driver: vemlab meshgen|convergence|small-edge|stab-sweep."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import ExperimentConfig, build_id, run
from .mesh import MeshError, format_mesh, quality_report
from .meshgen import FAMILIES, GLUED_DEFAULT, GenSpec, generate
from .system import SolverError
from .vem.projectors import DegenerateElementError
from .vem.stabilization import BOUNDARY_STABS, INTERNAL_STABS

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

log = logging.getLogger("vemlab")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=1, help="polynomial order 1..5 (default 1)")
    p.add_argument("--stab", choices=BOUNDARY_STABS, default="identity", help="boundary stabilization")
    p.add_argument(
        "--internal-stab", choices=INTERNAL_STABS, default="none", help="internal-moment stabilization (default none)"
    )
    p.add_argument("--r-op", default="vertex", help="averaging operator: cell, boundary or vertex (default vertex)")
    p.add_argument("--tau", type=_positive_float, default=1.0, help="stabilization scale (default 1)")
    p.add_argument("--solution", default="paper6", help="exact solution: paper6 or poly:<degree>")
    p.add_argument("--out", help="CSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vemlab", description="Virtual element experiments on polygonal meshes.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--version", action="version", version=build_id())
    sub = parser.add_subparsers(dest="command", required=True)
    # -v is accepted after the subcommand too
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")

    p = sub.add_parser("meshgen", parents=[common], help="generate a mesh and write it in the mesh text format")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, default=4, help="grid count (square, edge_split) or number of sites")
    p.add_argument("--nx", type=int, default=None, help="columns (hexagon) or left rows (glued)")
    p.add_argument("--ny", type=int, default=None, help="rows (hexagon) or right rows (glued)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lloyd-iters", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.5, help="split fraction for edge_split")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("convergence", parents=[common], help="H1 error table over a refinement sequence")
    _add_solver_flags(p)
    p.add_argument("--family", choices=("square", "hexagon", "voronoi", "lloyd"), default="square")
    p.add_argument("--mesh", help="mesh file; replaces the generated sequence with a single mesh")
    p.add_argument("--seed", type=int, default=0, help="site seed of the voronoi and lloyd families")
    p.add_argument("--lloyd-iters", type=int, default=None, help="override the Lloyd iteration count")
    p.add_argument("--levels", type=int, default=None, help="use only the first LEVELS meshes")

    p = sub.add_parser("small-edge", parents=[common], help="oscillation along x = 1/2 on the glued small-edge mesh")
    _add_solver_flags(p)
    p.add_argument("--mesh", help="mesh file replacing the glued mesh")
    p.add_argument("--nx", type=int, default=GLUED_DEFAULT[0], help="rows of the left half")
    p.add_argument("--ny", type=int, default=GLUED_DEFAULT[1], help="rows of the right half")
    p.add_argument("--ks", type=_int_list, default=(1, 2), help="orders, comma separated (default 1,2)")

    p = sub.add_parser("stab-sweep", parents=[common], help="stability constants on a square with one split edge")
    _add_solver_flags(p)
    p.add_argument("--ks", type=_int_list, default=(1, 2), help="orders, comma separated (default 1,2)")
    p.add_argument("--eps", type=_float_list, default=None, help="split fractions, comma separated")
    p.set_defaults(stab=None)  # every stabilization unless --stab is given
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _meshgen(args) -> None:
    nx, ny = args.nx, args.ny
    if args.family == "glued":
        nx = GLUED_DEFAULT[0] if nx is None else nx
        ny = GLUED_DEFAULT[1] if ny is None else ny
    spec = GenSpec(
        family=args.family,
        n=args.n,
        nx=8 if nx is None else nx,
        ny=10 if ny is None else ny,
        seed=args.seed,
        lloyd_iters=args.lloyd_iters,
        eps=args.eps,
    )
    mesh = generate(spec)
    rep = quality_report(mesh)
    log.info("%d cells, %d vertices, min edge %.3e", mesh.n_cells, mesh.n_vertices, rep.h_min)
    _emit(format_mesh(mesh, comment=f"{spec} build {build_id()}"), args.out)


def _config(args) -> ExperimentConfig:
    common = dict(
        command=args.command,
        k=args.k,
        stab=args.stab or "identity",
        internal_stab=args.internal_stab,
        r_op=args.r_op,
        tau=args.tau,
        solution=args.solution,
    )
    if args.command == "convergence":
        return ExperimentConfig(
            **common,
            family=args.family,
            mesh=args.mesh,
            seed=args.seed,
            lloyd_iters=args.lloyd_iters,
            levels=args.levels,
        )
    if args.command == "small-edge":
        return ExperimentConfig(**common, mesh=args.mesh, nx=args.nx, ny=args.ny, ks=args.ks)
    extra = {"eps": args.eps} if args.eps is not None else {}
    stabs = BOUNDARY_STABS if args.stab is None else (args.stab,)
    return ExperimentConfig(**common, ks=args.ks, stabs=stabs, **extra)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "meshgen":
            _meshgen(args)
        else:
            table = run(_config(args))
            _emit(table.to_csv(), args.out)
    except (SolverError, DegenerateElementError) as exc:
        print(f"vemlab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, MeshError, OSError) as exc:
        print(f"vemlab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
