"""Polygonal meshes: representation, file formats, generators, skew maps."""

from .core import (
    CellView,
    EdgeView,
    Mesh,
    as_cell_view,
    cell_flatness,
    d_TF,
    flatness,
    polygon_area,
    polygon_centroid,
    polygon_diameter,
)
from .generators import (
    generate_cartesian,
    generate_hexagonal,
    generate_locally_refined,
)
from .io import load_mesh, save_fvca5_typ2, save_native
from .skew import (
    SkewMap,
    edge_jacobian,
    estimate_skew_map,
    map_cell,
    second_moment_matrix,
    shrink_cell,
)

__all__ = [
    "CellView",
    "EdgeView",
    "Mesh",
    "SkewMap",
    "as_cell_view",
    "cell_flatness",
    "d_TF",
    "edge_jacobian",
    "estimate_skew_map",
    "flatness",
    "generate_cartesian",
    "generate_hexagonal",
    "generate_locally_refined",
    "load_mesh",
    "map_cell",
    "polygon_area",
    "polygon_centroid",
    "polygon_diameter",
    "save_fvca5_typ2",
    "save_native",
    "second_moment_matrix",
    "shrink_cell",
]
