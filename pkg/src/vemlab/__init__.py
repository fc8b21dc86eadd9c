"""Virtual element solver for the Poisson problem on general polygonal meshes."""

from .mesh import ElementGeometry, MeshError, PolyMesh, element_geometry, load_mesh, save_mesh
from .system import SolverError, assemble, discretize, pcg, solve
from .vem import StabChoice, build_element

__version__ = "0.1.0"

__all__ = [
    "ElementGeometry",
    "MeshError",
    "PolyMesh",
    "SolverError",
    "StabChoice",
    "assemble",
    "build_element",
    "discretize",
    "element_geometry",
    "load_mesh",
    "pcg",
    "save_mesh",
    "solve",
]
