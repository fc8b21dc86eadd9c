"""Polygonal meshes: topology, per-cell geometry, quality metrics and text I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

GEOM_TOL = 1e-12


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


class MeshParseError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def polygon_area_centroid(vertices: np.ndarray) -> tuple[float, np.ndarray]:
    """Signed area and area centroid by the shoelace formulas."""
    v = np.asarray(vertices, dtype=float)
    # shift for round-off: the formulas are translation invariant
    o = v[0]
    p = v - o
    q = np.roll(p, -1, axis=0)
    cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, v.mean(axis=0)
    cx = ((p[:, 0] + q[:, 0]) * cross).sum() / (6.0 * area)
    cy = ((p[:, 1] + q[:, 1]) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy]) + o


def _segments_cross(p1, p2, q1, q2) -> bool:
    """True if closed segments p1p2 and q1q2 intersect."""

    def orient(a, b, c):
        val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        scale = max(abs(b[0] - a[0]) + abs(b[1] - a[1]), abs(c[0] - a[0]) + abs(c[1] - a[1]), 1e-300)
        if abs(val) <= 1e-14 * scale * scale:
            return 0
        return 1 if val > 0 else -1

    def on_seg(a, b, c):
        return min(a[0], b[0]) - GEOM_TOL <= c[0] <= max(a[0], b[0]) + GEOM_TOL and min(
            a[1], b[1]
        ) - GEOM_TOL <= c[1] <= max(a[1], b[1]) + GEOM_TOL

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def _is_simple(verts: np.ndarray) -> bool:
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, verts[j], verts[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True)
class ElementGeometry:
    vertices: np.ndarray
    diameter: float
    area: float
    centroid: np.ndarray
    rho: float
    edge_lengths: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.vertices)

    @property
    def h_min(self) -> float:
        return float(self.edge_lengths.min())

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def log_factor(self) -> float:
        return math.log1p(self.diameter / self.h_min)


def polygon_geometry(vertices) -> ElementGeometry:
    """Geometry of one CCW polygon. Raises MeshError if the area is not positive."""
    v = np.array(vertices, dtype=float)
    area, centroid = polygon_area_centroid(v)
    if not area > 0.0:
        raise MeshError(f"degenerate or clockwise polygon (signed area {area:.3e})")
    d = v[:, None, :] - v[None, :, :]
    diameter = float(np.sqrt((d**2).sum(axis=-1)).max())
    evec = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(evec[:, 0], evec[:, 1])
    if np.any(lengths <= 0.0):
        raise MeshError("zero-length edge")
    tangents = evec / lengths[:, None]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    # distance from centroid to each edge's supporting line
    dist = ((v - centroid) * normals).sum(axis=1)
    rho = float(np.abs(dist).min())
    rho = min(rho, 0.5 * diameter)
    for arr in (v, lengths, tangents, normals, centroid):
        arr.setflags(write=False)
    return ElementGeometry(v, diameter, area, centroid, rho, lengths, normals, tangents)


@dataclass(frozen=True)
class MeshQualityReport:
    gamma_min: float
    N_max: int
    eta_min: float
    log_factor: float
    h_min: float
    h_mean: float

    def assumptions(self, gamma_tol: float = 0.05, eta_tol: float = 0.05) -> dict[str, bool]:
        """Heuristic reading of the mesh assumptions for this single mesh."""
        return {
            "A1": self.gamma_min >= gamma_tol,
            "A2": True,
            "A3": self.eta_min >= eta_tol,
        }


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Conforming polygonal mesh.

    Cells are CCW cycles of vertex indices. Consecutive collinear vertices are
    allowed; each listed vertex starts a new (straight) edge.
    """

    vertices: np.ndarray
    cells: tuple[tuple[int, ...], ...]
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", tuple(tuple(int(i) for i in c) for c in self.cells))
        self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def _edge_table(self):
        edge_index: dict[tuple[int, int], int] = {}
        edges: list[tuple[int, int]] = []
        incident: list[list[tuple[int, int]]] = []
        cell_edges = []
        for ci, cell in enumerate(self.cells):
            ids = []
            n = len(cell)
            for li in range(n):
                a, b = cell[li], cell[(li + 1) % n]
                key = (a, b) if a < b else (b, a)
                e = edge_index.get(key)
                if e is None:
                    e = len(edges)
                    edge_index[key] = e
                    edges.append(key)
                    incident.append([])
                incident[e].append((ci, li))
                ids.append(e)
            cell_edges.append(tuple(ids))
        return (
            np.array(edges, dtype=np.int64).reshape(-1, 2),
            [tuple(x) for x in incident],
            tuple(cell_edges),
            edge_index,
        )

    @property
    def edges(self) -> np.ndarray:
        """(n_edges, 2) vertex pairs, lower index first."""
        return self._edge_table[0]

    @property
    def edge_cells(self) -> list[tuple[tuple[int, int], ...]]:
        """For each edge, the (cell, local edge) pairs that use it."""
        return self._edge_table[1]

    @property
    def cell_edges(self) -> tuple[tuple[int, ...], ...]:
        return self._edge_table[2]

    def edge_id(self, a: int, b: int) -> int:
        return self._edge_table[3][(a, b) if a < b else (b, a)]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.array([i for i, inc in enumerate(self.edge_cells) if len(inc) == 1], dtype=np.int64)

    @cached_property
    def boundary_vertex_flags(self) -> np.ndarray:
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.edges[self.boundary_edges].ravel()] = True
        flags.setflags(write=False)
        return flags

    def cell_vertices(self, c: int) -> np.ndarray:
        return self.vertices[list(self.cells[c])]

    def geometry(self, c: int) -> ElementGeometry:
        return element_geometry(self, c)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex coordinates")
        nv = self.n_vertices
        for ci, cell in enumerate(self.cells):
            if len(cell) < 3:
                raise MeshError(f"cell {ci}: fewer than 3 vertices")
            if len(set(cell)) != len(cell):
                raise MeshError(f"cell {ci}: repeated vertex in cycle")
            if min(cell) < 0 or max(cell) >= nv:
                raise MeshError(f"cell {ci}: vertex index out of range")
            verts = self.vertices[list(cell)]
            area, _ = polygon_area_centroid(verts)
            if not area > 0.0:
                raise MeshError(f"cell {ci}: clockwise or degenerate orientation (signed area {area:.3e})")
            if not _is_simple(verts):
                raise MeshError(f"cell {ci}: polygon is not simple")
        for e, inc in enumerate(self.edge_cells):
            if len(inc) > 2:
                raise MeshError(f"edge {tuple(self.edges[e])} shared by more than two cells")
            if len(inc) == 2:
                (c0, l0), (c1, l1) = inc
                a0 = self.cells[c0][l0]
                a1 = self.cells[c1][l1]
                if a0 == a1:
                    raise MeshError(f"cells {c0} and {c1} traverse edge {tuple(self.edges[e])} in the same direction")

    def total_area(self) -> float:
        return float(sum(polygon_area_centroid(self.cell_vertices(c))[0] for c in range(self.n_cells)))

    def mean_diameter(self) -> float:
        return float(np.mean([element_geometry(self, c).diameter for c in range(self.n_cells)]))


def element_geometry(mesh: PolyMesh, cell: int) -> ElementGeometry:
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    try:
        return polygon_geometry(mesh.cell_vertices(cell))
    except MeshError as exc:
        raise MeshError(f"cell {cell}: {exc}") from None


def quality_report(mesh: PolyMesh) -> MeshQualityReport:
    gamma, nmax, eta, logf, hmin, diams = math.inf, 0, math.inf, 0.0, math.inf, []
    for c in range(mesh.n_cells):
        g = element_geometry(mesh, c)
        gamma = min(gamma, g.rho / g.diameter)
        nmax = max(nmax, g.n_edges)
        eta = min(eta, g.h_min / g.diameter)
        logf = max(logf, g.log_factor)
        hmin = min(hmin, g.h_min)
        diams.append(g.diameter)
    return MeshQualityReport(gamma, nmax, eta, logf, hmin, float(np.mean(diams)))


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_mesh(text: str) -> PolyMesh:
    lines = _data_lines(text)
    try:
        lineno, tok = next(lines)
    except StopIteration:
        raise MeshParseError("empty mesh file") from None
    if len(tok) != 2:
        raise MeshParseError("header must be 'nv nc'", lineno)
    try:
        nv, nc = int(tok[0]), int(tok[1])
    except ValueError:
        raise MeshParseError("header counts must be integers", lineno) from None
    if nv < 3 or nc < 1:
        raise MeshParseError("need at least 3 vertices and 1 cell", lineno)
    verts = np.empty((nv, 2))
    for i in range(nv):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {nv} vertex lines, got {i}") from None
        if len(tok) != 2:
            raise MeshParseError("vertex line must be 'x y'", lineno)
        try:
            verts[i] = float(tok[0]), float(tok[1])
        except ValueError:
            raise MeshParseError("bad vertex coordinate", lineno) from None
    cells = []
    for i in range(nc):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {nc} cell lines, got {i}") from None
        try:
            ids = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError("cell indices must be integers", lineno) from None
        if ids[0] != len(ids) - 1:
            raise MeshParseError(f"cell declares {ids[0]} vertices but lists {len(ids) - 1}", lineno)
        cells.append(ids[1:])
    extra = next(lines, None)
    if extra is not None:
        raise MeshParseError("trailing data after the last cell", extra[0])
    return PolyMesh(verts, cells)


def load_mesh(path) -> PolyMesh:
    return parse_mesh(Path(path).read_text())


def format_mesh(mesh: PolyMesh, comment: str | None = None) -> str:
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append(f"{mesh.n_vertices} {mesh.n_cells}")
    out.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    out.extend(" ".join(str(i) for i in (len(c), *c)) for c in mesh.cells)
    return "\n".join(out) + "\n"


def save_mesh(mesh: PolyMesh, path, comment: str | None = None) -> None:
    Path(path).write_text(format_mesh(mesh, comment))
