"""Mesh families on the unit square.

Voronoi-type meshes (random, Lloyd-relaxed, hexagonal) are built by clipping
the unit square with the bisector half-planes of each site. Independent
polygon soups are turned into a conforming PolyMesh by merging coincident
vertices and inserting every vertex that lies inside another cell's edge as a
(collinear) hanging vertex of that cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import MeshError, PolyMesh, polygon_area_centroid
from .quadrature import polygon_rule

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
MERGE_TOL = 1e-10

FAMILIES = ("square", "hexagon", "voronoi", "lloyd", "glued", "edge_split")

# refinement sequences of the convergence study
SQUARE_LEVELS = (4, 8, 16, 32)
HEXAGON_LEVELS = ((8, 10), (18, 20), (26, 30), (34, 40), (44, 50))
VORONOI_LEVELS = (25, 100, 400, 1600)
LLOYD_ITERS = 100

# glued mesh whose interface has an edge of length 3.25e-4 at y ~ 0.396
GLUED_DEFAULT = (53, 58)


@dataclass(frozen=True)
class GenSpec:
    family: str
    n: int = 4
    nx: int = 8
    ny: int = 10
    seed: int = 0
    lloyd_iters: int = 0
    eps: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown mesh family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1 or self.nx < 1 or self.ny < 1 or self.lloyd_iters < 0:
            raise ValueError("resolution parameters must be positive")
        if not 0.0 < self.eps <= 0.5:
            raise ValueError("split fraction eps must lie in (0, 1/2]")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def generate(spec: GenSpec) -> PolyMesh:
    if spec.family == "square":
        return gen_square(spec.n)
    if spec.family == "hexagon":
        return gen_hexagon(spec.nx, spec.ny)
    if spec.family == "voronoi":
        return gen_voronoi(spec.n, spec.seed, spec.lloyd_iters)
    if spec.family == "lloyd":
        return gen_voronoi(spec.n, spec.seed, spec.lloyd_iters or LLOYD_ITERS)
    if spec.family == "glued":
        return gen_glued(spec.nx, spec.ny)
    # edge_split: n x n squares with one interior edge split near the center
    mesh = gen_square(spec.n)
    cell, edge = central_edge(mesh)
    return split_edge(mesh, cell, edge, spec.eps)


def gen_square(n: int) -> PolyMesh:
    """n x n uniform squares on the unit square."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    cells = []
    for j in range(n):
        for i in range(n):
            v0 = j * (n + 1) + i
            cells.append((v0, v0 + 1, v0 + n + 2, v0 + n + 1))
    return PolyMesh(verts, cells)


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon with normal . x <= offset."""
    s = poly @ normal - offset
    inside = s <= 0.0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out)


def voronoi_cells(sites: np.ndarray, domain: np.ndarray = UNIT_SQUARE) -> list[np.ndarray]:
    """Voronoi cells of `sites` clipped to a convex domain (CCW polygons)."""
    sites = np.asarray(sites, dtype=float)
    d2 = ((sites[:, None, :] - sites[None, :, :]) ** 2).sum(axis=-1)
    order = np.argsort(d2, axis=1, kind="stable")
    cells = []
    for i, s in enumerate(sites):
        poly = domain.copy()
        reach = np.sqrt(((poly - s) ** 2).sum(axis=1).max())
        for j in order[i, 1:]:
            dist = np.sqrt(d2[i, j])
            if 0.5 * dist > reach:
                break
            normal = sites[j] - s
            offset = normal @ (0.5 * (s + sites[j]))
            poly = _clip(poly, normal, offset)
            if len(poly) == 0:
                break
            reach = np.sqrt(((poly - s) ** 2).sum(axis=1).max())
        cells.append(poly)
    return cells


def _dejitter(sites: np.ndarray, rng: np.random.Generator, tol: float = 1e-9) -> np.ndarray:
    # coincident sites would give an empty cell: nudge them apart
    sites = sites.copy()
    for _ in range(100):
        pairs = cKDTree(sites).query_pairs(tol, output_type="ndarray")
        if len(pairs) == 0:
            return sites
        for _, j in pairs:
            sites[j] = np.clip(sites[j] + rng.uniform(-1e-6, 1e-6, size=2), 0.0, 1.0)
    raise MeshError("could not separate coincident Voronoi sites")


def mesh_from_polygons(polygons, tol: float = MERGE_TOL) -> PolyMesh:
    """Glue a polygon soup into a conforming mesh.

    Coincident vertices (within `tol`) are merged, consecutive duplicates are
    dropped, and any vertex lying in the interior of a cell edge is inserted
    into that cell's cycle.
    """
    polys = [np.asarray(p, dtype=float) for p in polygons if len(p) >= 3]
    pts = np.concatenate(polys)
    tree = cKDTree(pts)
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in tree.query_pairs(tol, output_type="ndarray"):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(pts))])
    uniq, label = np.unique(roots, return_inverse=True)
    verts = pts[uniq]

    cells = []
    start = 0
    for p in polys:
        ids = label[start : start + len(p)]
        start += len(p)
        cyc = [int(i) for k, i in enumerate(ids) if i != ids[k - 1]]
        if len(cyc) >= 3:
            cells.append(cyc)

    vtree = cKDTree(verts)
    conforming = []
    for cyc in cells:
        out = []
        n = len(cyc)
        for k in range(n):
            a, b = cyc[k], cyc[(k + 1) % n]
            out.append(a)
            pa, pb = verts[a], verts[b]
            seg = pb - pa
            length = np.hypot(*seg)
            cand = vtree.query_ball_point(0.5 * (pa + pb), 0.5 * length + tol)
            hits = []
            for c in cand:
                if c in (a, b):
                    continue
                t = (verts[c] - pa) @ seg / length**2
                if not 0.0 < t < 1.0:
                    continue
                off = abs(seg[0] * (verts[c][1] - pa[1]) - seg[1] * (verts[c][0] - pa[0])) / length
                if off <= tol:
                    hits.append((t, c))
            out.extend(c for _, c in sorted(hits))
        conforming.append(out)

    used = np.unique(np.concatenate([np.array(c) for c in conforming]))
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return PolyMesh(verts[used], [[int(remap[i]) for i in c] for c in conforming])


def lloyd_step(sites: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    cells = voronoi_cells(sites)
    new = np.array([polygon_area_centroid(c)[1] for c in cells])
    return np.clip(new, 0.0, 1.0), cells


def cvt_energy(sites: np.ndarray, cells: list[np.ndarray] | None = None) -> float:
    """sum_i int_{V_i} |x - s_i|^2 over the (clipped) Voronoi cells."""
    if cells is None:
        cells = voronoi_cells(sites)
    total = 0.0
    for s, c in zip(sites, cells):
        rule = polygon_rule(c, 2)
        total += float(rule.weights @ ((rule.points - s) ** 2).sum(axis=1))
    return total


def voronoi_sites(n: int, seed: int, lloyd_iters: int = 0) -> np.ndarray:
    """Uniform random sites in the unit square, optionally Lloyd-relaxed."""
    if n < 2:
        raise ValueError("need at least 2 sites")
    rng = np.random.default_rng(seed)
    sites = _dejitter(rng.uniform(0.0, 1.0, size=(n, 2)), rng)
    for _ in range(lloyd_iters):
        sites, _ = lloyd_step(sites)
        sites = _dejitter(sites, rng)
    return sites


def gen_voronoi(n: int, seed: int = 0, lloyd_iters: int = 0) -> PolyMesh:
    """Voronoi tessellation of n random sites, after `lloyd_iters` Lloyd sweeps."""
    sites = voronoi_sites(n, seed, lloyd_iters)
    return mesh_from_polygons(voronoi_cells(sites))


def gen_hexagon(nx: int, ny: int) -> PolyMesh:
    """Almost regular hexagons: Voronoi cells of a row-staggered lattice.

    Even rows hold nx sites, odd rows nx + 1 (the outer two on x = 0 and
    x = 1), so the mesh has nx*ny + ny//2 cells. Cells cut by the boundary
    become quadrilaterals or pentagons.
    """
    if nx < 2 or ny < 2:
        raise ValueError("hexagon mesh needs nx, ny >= 2")
    sites = []
    for j in range(ny):
        y = (j + 0.5) / ny
        if j % 2 == 0:
            xs = (np.arange(nx) + 0.5) / nx
        else:
            xs = np.arange(nx + 1) / nx
        sites.extend((x, y) for x in xs)
    return mesh_from_polygons(voronoi_cells(np.array(sites)))


def gen_glued(left_ny: int, right_ny: int) -> PolyMesh:
    """Two independent square-ish grids glued along x = 1/2.

    The left half carries left_ny rows, the right half right_ny rows, each
    with round(ny/2) columns. Interface vertices of one side become
    collinear hanging vertices of the other side's cells, which creates
    very small edges wherever the two vertical spacings nearly coincide.
    """
    if left_ny == right_ny:
        raise ValueError("left_ny and right_ny must differ to produce a non-matching interface")
    if left_ny < 1 or right_ny < 1:
        raise ValueError("row counts must be positive")
    polys = []
    for x0, ny in ((0.0, left_ny), (0.5, right_ny)):
        nx = max(1, round(ny / 2))
        xs = x0 + 0.5 * np.arange(nx + 1) / nx
        ys = np.arange(ny + 1) / ny
        for j in range(ny):
            for i in range(nx):
                polys.append(
                    np.array([[xs[i], ys[j]], [xs[i + 1], ys[j]], [xs[i + 1], ys[j + 1]], [xs[i], ys[j + 1]]])
                )
    return mesh_from_polygons(polys)


def interface_edges(mesh: PolyMesh, x0: float = 0.5, tol: float = 1e-12) -> np.ndarray:
    """Lengths of the mesh edges lying on the vertical line x = x0, bottom to top."""
    out = []
    for a, b in mesh.edges:
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        if abs(pa[0] - x0) <= tol and abs(pb[0] - x0) <= tol:
            out.append((min(pa[1], pb[1]), abs(pb[1] - pa[1])))
    out.sort()
    return np.array(out).reshape(-1, 2)


def split_edge(mesh: PolyMesh, cell: int, edge: int, eps: float) -> PolyMesh:
    """Insert a vertex at fraction eps along local `edge` of `cell`.

    The vertex is inserted in every cell sharing the edge, so the result is
    conforming; the new edge next to the edge's start vertex has length
    eps * h_e.
    """
    if not 0.0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    cyc = mesh.cells[cell]
    if not 0 <= edge < len(cyc):
        raise IndexError(f"edge index {edge} out of range for cell {cell}")
    a, b = cyc[edge], cyc[(edge + 1) % len(cyc)]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    new = len(mesh.vertices)
    verts = np.vstack([mesh.vertices, pa + eps * (pb - pa)])
    cells = []
    for c in mesh.cells:
        c = list(c)
        n = len(c)
        for i in range(n):
            u, w = c[i], c[(i + 1) % n]
            if (u, w) == (a, b) or (u, w) == (b, a):
                c.insert(i + 1, new)
                break
        cells.append(c)
    return PolyMesh(verts, cells)


def central_edge(mesh: PolyMesh) -> tuple[int, int]:
    """(cell, local edge) of the interior edge whose midpoint is closest to (1/2, 1/2)."""
    best = None
    for e, inc in enumerate(mesh.edge_cells):
        if len(inc) != 2:
            continue
        a, b = mesh.edges[e]
        mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        d = float(((mid - 0.5) ** 2).sum())
        if best is None or d < best[0] - 1e-14:
            best = (d, inc[0])
    if best is None:
        raise MeshError("mesh has no interior edge")
    return best[1]
