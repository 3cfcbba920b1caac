"""decomesh: interactive decomposition of composed SDF scenes."""

__version__ = "0.1.0"

from .mesh import NeuralMesh, load_mesh, save_mesh, extract_submesh
from .sdf import ComposedScene, SdfField, density, sdf_gradient
from .render import Ray, render_ray, opacity_per_field, find_floor_point
from .grow import GrowConfig, GrownRegion, grow, grow_by_similarity_only
from .metrics import evaluate, sample_surface

__all__ = [
    "NeuralMesh", "load_mesh", "save_mesh", "extract_submesh",
    "ComposedScene", "SdfField", "density", "sdf_gradient",
    "Ray", "render_ray", "opacity_per_field", "find_floor_point",
    "GrowConfig", "GrownRegion", "grow", "grow_by_similarity_only",
    "evaluate", "sample_surface",
]
