"""Per-cell skew maps: linear maps sending stretched cells to isotropic ones.

The estimated map is built from the cell's second-moment (covariance)
matrix: in the principal frame each axis is rescaled by the inverse of its
standard deviation, normalized so det = 1 (area preserving).  The image
cell has equal principal second moments, hence bounded flatness, no matter
how elongated the original cell is.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import MeshValidationError
from .core import CellView, as_cell_view, polygon_second_moments

DEGENERACY_RATIO = 1e-14


@dataclass(frozen=True)
class SkewMap:
    """An invertible linear map attached to one cell."""

    cell: int
    matrix: np.ndarray
    jacobian: float

    @classmethod
    def identity(cls, cell=-1):
        return cls(cell=cell, matrix=np.eye(2), jacobian=1.0)


def second_moment_matrix(view):
    """Covariance of the cell about its centroid, 1/|T| int (x-c)(x-c)^T."""
    return polygon_second_moments(view.points, view.centroid, view.area)


def estimate_skew_map(mesh_or_view, cell=None):
    """Estimate an area-preserving skew map for one cell.

    Eigendecompose the second-moment matrix as R diag(l1, l2) R^t and return
    phi = diag(sqrt(lbar/l1), sqrt(lbar/l2)) R^t with lbar = sqrt(l1 l2), so
    det(phi) = 1 and the image cell has equal principal moments.

    Raises
    ------
    MeshValidationError
        When the covariance is degenerate (needle cell beyond representable
        skew): l_min <= 1e-14 * l_max.
    """
    view = as_cell_view(mesh_or_view, cell)
    cov = second_moment_matrix(view)
    lams, rot = np.linalg.eigh(cov)
    if lams[0] <= DEGENERACY_RATIO * lams[1]:
        raise MeshValidationError(
            f"cell {view.index}: degenerate second-moment matrix "
            "(needle cell beyond representable skew)"
        )
    if np.linalg.det(rot) < 0.0:  # keep the map orientation preserving
        rot = rot[:, ::-1].copy()
        lams = lams[::-1]
    lbar = float(np.sqrt(lams[0] * lams[1]))
    matrix = np.diag(np.sqrt(lbar / lams)) @ rot.T
    return SkewMap(cell=view.index, matrix=matrix,
                   jacobian=float(abs(np.linalg.det(matrix))))


def map_cell(view, matrix, index=None):
    """Image of a cell under an orientation-preserving linear map.

    The image edges correspond one-to-one, in order, to the original
    edges, which the transport checks rely on; maps with det <= 0 would
    silently break that pairing and are rejected.
    """
    matrix = np.asarray(matrix, dtype=float)
    if np.linalg.det(matrix) <= 0.0:
        raise ValueError("skew map must be orientation preserving (det > 0)")
    pts = view.points @ matrix.T
    return CellView.from_polygon(pts, index=view.index if index is None else index)


def edge_jacobian(matrix, edge):
    """Length scale factor |phi t_F| of the map restricted to an edge."""
    return float(np.linalg.norm(np.asarray(matrix) @ edge.tangent))


def shrink_cell(view, factor, index=None):
    """Scaled copy of a cell about its centroid (shape preserved)."""
    pts = view.centroid + factor * (view.points - view.centroid)
    return CellView.from_polygon(pts, index=view.index if index is None else index)
