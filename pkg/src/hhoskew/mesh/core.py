"""Polygonal mesh representation and geometric queries.

Cells are simple polygons stored as counterclockwise vertex loops; edges are
derived from the loops and shared by at most two cells.  A cell side that a
finer neighbour subdivides is stored as several mesh edges of that cell
(edge-first representation of nonconforming meshes), so a "quad" cell may
list five or more edges.  All cells are required to be star-shaped with
respect to their centroid, which makes fan triangulation and the
centroid-ball flatness radius well defined.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import MeshValidationError

REL_TOL = 1e-12


def polygon_area(points):
    """Signed area of a closed polygon (positive when counterclockwise).

    Computed relative to the first vertex: thin cells far from the origin
    would otherwise lose most digits to cancellation in the shoelace sum.
    """
    x = points[:, 0] - points[0, 0]
    y = points[:, 1] - points[0, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(points):
    """Area centroid of a simple polygon given as a vertex loop."""
    x = points[:, 0] - points[0, 0]
    y = points[:, 1] - points[0, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * np.sum(cross)
    if area == 0.0:  # degenerate; validation rejects the cell right after
        return points.mean(axis=0)
    cx = np.sum((x + np.roll(x, -1)) * cross) / (6.0 * area)
    cy = np.sum((y + np.roll(y, -1)) * cross) / (6.0 * area)
    return np.array([cx + points[0, 0], cy + points[0, 1]])


def polygon_diameter(points):
    """Largest vertex-to-vertex distance."""
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def polygon_second_moments(points, centroid, area):
    """Exact covariance 1/|T| int_T (x-c)(x-c)^t dx of a star-shaped polygon.

    Summed analytically over the centroid fan triangles, so it is a
    deterministic function of the vertex list alone; the polynomial bases
    key their inertial frames on it.
    """
    rel = points - centroid
    nxt = np.roll(rel, -1, axis=0)
    cross = rel[:, 0] * nxt[:, 1] - rel[:, 1] * nxt[:, 0]  # 2 x triangle areas
    # per fan triangle (0, a, b): int x x^t = (A/12) (a a^t + b b^t + s s^t),
    # s = a + b (the apex sits at the origin of the relative coordinates)
    s = rel + nxt
    outer = (np.einsum("md,me->mde", rel, rel)
             + np.einsum("md,me->mde", nxt, nxt)
             + np.einsum("md,me->mde", s, s))
    cov = np.einsum("m,mde->de", cross / 24.0, outer) / area
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class EdgeView:
    """One edge of a cell, seen from that cell.

    The tangent follows the edge's global vertex order so that both incident
    cells share one polynomial frame on the edge; the normal is the outward
    unit normal for the owning cell.
    """

    index: int
    p0: np.ndarray
    p1: np.ndarray
    midpoint: np.ndarray
    length: float
    tangent: np.ndarray
    normal: np.ndarray
    d_tf: float
    boundary: bool


@dataclass(frozen=True)
class CellView:
    """Geometry of a single polygonal cell, detached from the mesh.

    Operator construction works on views, so transformed copies of a cell
    (images under a skew map, shrunk copies, ad-hoc test polygons) go through
    the exact same code path as mesh cells.
    """

    index: int
    points: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float
    edges: tuple

    @classmethod
    def from_polygon(cls, points, index=-1):
        points = np.asarray(points, dtype=float)
        area = polygon_area(points)
        if area < 0.0:
            points = points[::-1].copy()
            area = -area
        if area <= 0.0:
            raise MeshValidationError("polygon has non-positive area")
        centroid = polygon_centroid(points)
        diameter = polygon_diameter(points)
        edges = []
        m = len(points)
        for j in range(m):
            p0 = points[j]
            p1 = points[(j + 1) % m]
            d = p1 - p0
            length = float(np.hypot(d[0], d[1]))
            if length <= 0.0:
                raise MeshValidationError("polygon has a zero-length side")
            tangent = d / length
            normal = np.array([tangent[1], -tangent[0]])
            edges.append(
                EdgeView(
                    index=-1,
                    p0=p0,
                    p1=p1,
                    midpoint=0.5 * (p0 + p1),
                    length=length,
                    tangent=tangent,
                    normal=normal,
                    d_tf=area / length,
                    boundary=True,
                )
            )
        view = cls(
            index=index,
            points=points,
            area=float(area),
            centroid=centroid,
            diameter=diameter,
            edges=tuple(edges),
        )
        _check_star_shaped(view)
        return view


def _check_star_shaped(view):
    pts = view.points
    c = view.centroid
    m = len(pts)
    for j in range(m):
        a = pts[j] - c
        b = pts[(j + 1) % m] - c
        if a[0] * b[1] - a[1] * b[0] <= 0.0:
            raise MeshValidationError(
                f"cell {view.index}: centroid does not see the boundary "
                "(cell is not star-shaped w.r.t. its centroid)"
            )


class Mesh:
    """Immutable polygonal mesh of a 2D domain.

    Attributes
    ----------
    vertices : (nv, 2) array of vertex coordinates.
    edge_vertices : (ne, 2) int array, the two endpoint ids of each edge.
    edge_cells : (ne, 2) int array, incident cell ids (-1 when absent).
    cell_loops : per cell, the counterclockwise vertex-id loop.
    cell_edges : per cell, the edge ids in loop order.
    cell_edge_dir : per cell, +1 when the loop traverses the edge in its
        stored vertex order, -1 otherwise.
    """

    def __init__(self, vertices, edge_vertices, edge_cells, cell_loops,
                 cell_edges, cell_edge_dir):
        self.vertices = np.asarray(vertices, dtype=float)
        self.edge_vertices = np.asarray(edge_vertices, dtype=np.int64)
        self.edge_cells = np.asarray(edge_cells, dtype=np.int64)
        self.cell_loops = [np.asarray(l, dtype=np.int64) for l in cell_loops]
        self.cell_edges = [np.asarray(e, dtype=np.int64) for e in cell_edges]
        self.cell_edge_dir = [np.asarray(d, dtype=np.int64) for d in cell_edge_dir]
        self._compute_geometry()
        self._validate()
        for arr in (self.vertices, self.edge_vertices, self.edge_cells):
            arr.setflags(write=False)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_cell_loops(cls, vertices, loops):
        """Build a mesh from vertex coordinates and per-cell vertex loops.

        Loops may run clockwise (they are flipped) and may contain collinear
        vertices, which become genuine mesh edges (hanging-node sides).
        Shared edges are identified by their endpoint ids, so neighbouring
        loops must reference identical vertex ids along common sides.
        """
        vertices = np.asarray(vertices, dtype=float)
        edge_ids = {}
        edge_vertices = []
        edge_cells = []
        cell_loops = []
        cell_edges = []
        cell_edge_dir = []
        for ci, loop in enumerate(loops):
            loop = np.asarray(loop, dtype=np.int64)
            if len(loop) < 3:
                raise MeshValidationError(f"cell {ci}: fewer than 3 vertices")
            if len(np.unique(loop)) != len(loop):
                raise MeshValidationError(f"cell {ci}: repeated vertex in loop")
            pts = vertices[loop]
            if polygon_area(pts) < 0.0:
                loop = loop[::-1].copy()
            eids = np.empty(len(loop), dtype=np.int64)
            dirs = np.empty(len(loop), dtype=np.int64)
            for j in range(len(loop)):
                a = int(loop[j])
                b = int(loop[(j + 1) % len(loop)])
                key = (a, b) if a < b else (b, a)
                eid = edge_ids.get(key)
                if eid is None:
                    eid = len(edge_vertices)
                    edge_ids[key] = eid
                    edge_vertices.append((a, b))
                    edge_cells.append([ci, -1])
                else:
                    if edge_cells[eid][1] != -1:
                        raise MeshValidationError(
                            f"edge {key} has more than 2 incident cells"
                        )
                    edge_cells[eid][1] = ci
                dirs[j] = 1 if edge_vertices[eid][0] == a else -1
                eids[j] = eid
            cell_loops.append(loop)
            cell_edges.append(eids)
            cell_edge_dir.append(dirs)
        return cls(vertices, np.array(edge_vertices, dtype=np.int64),
                   np.array(edge_cells, dtype=np.int64),
                   cell_loops, cell_edges, cell_edge_dir)

    # -- derived geometry --------------------------------------------------

    def _compute_geometry(self):
        v0 = self.vertices[self.edge_vertices[:, 0]]
        v1 = self.vertices[self.edge_vertices[:, 1]]
        self.edge_midpoint = 0.5 * (v0 + v1)
        self.edge_length = np.hypot(*(v1 - v0).T)
        self.boundary_edge = self.edge_cells[:, 1] < 0
        nc = len(self.cell_loops)
        self.cell_area = np.empty(nc)
        self.cell_centroid = np.empty((nc, 2))
        self.cell_diameter = np.empty(nc)
        for i, loop in enumerate(self.cell_loops):
            pts = self.vertices[loop]
            self.cell_area[i] = polygon_area(pts)
            self.cell_centroid[i] = polygon_centroid(pts)
            self.cell_diameter[i] = polygon_diameter(pts)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edge_vertices)

    @property
    def n_cells(self):
        return len(self.cell_loops)

    @property
    def n_interior_edges(self):
        return int(np.count_nonzero(~self.boundary_edge))

    @property
    def h(self):
        """Mesh size: the largest cell diameter."""
        return float(self.cell_diameter.max())

    def cell(self, i):
        """Return the :class:`CellView` of cell ``i``."""
        loop = self.cell_loops[i]
        pts = self.vertices[loop]
        area = float(self.cell_area[i])
        edges = []
        for j, eid in enumerate(self.cell_edges[i]):
            eid = int(eid)
            a, b = self.edge_vertices[eid]
            pa = self.vertices[a]
            pb = self.vertices[b]
            length = float(self.edge_length[eid])
            tangent = (pb - pa) / length
            # outward normal from the CCW traversal direction
            sgn = float(self.cell_edge_dir[i][j])
            normal = sgn * np.array([tangent[1], -tangent[0]])
            edges.append(
                EdgeView(
                    index=eid,
                    p0=pa,
                    p1=pb,
                    midpoint=self.edge_midpoint[eid],
                    length=length,
                    tangent=tangent,
                    normal=normal,
                    d_tf=area / length,
                    boundary=bool(self.boundary_edge[eid]),
                )
            )
        return CellView(
            index=i,
            points=pts,
            area=area,
            centroid=self.cell_centroid[i],
            diameter=float(self.cell_diameter[i]),
            edges=tuple(edges),
        )

    def outward_normal(self, cell, edge):
        """Outward unit normal of ``cell`` on its edge with global id ``edge``."""
        pos = self._local_edge_position(cell, edge)
        a, b = self.edge_vertices[edge]
        t = (self.vertices[b] - self.vertices[a]) / self.edge_length[edge]
        sgn = float(self.cell_edge_dir[cell][pos])
        return sgn * np.array([t[1], -t[0]])

    def _local_edge_position(self, cell, edge):
        pos = np.nonzero(self.cell_edges[cell] == edge)[0]
        if len(pos) == 0:
            raise MeshValidationError(
                f"edge {edge} is not incident to cell {cell}"
            )
        return int(pos[0])

    # -- validation ---------------------------------------------------------

    def _validate(self):
        if np.any(self.edge_cells[:, 0] < 0):
            raise MeshValidationError("edge with no incident cell")
        if np.any(self.edge_length <= 0.0):
            raise MeshValidationError("zero-length edge")
        for i, loop in enumerate(self.cell_loops):
            pts = self.vertices[loop]
            area = self.cell_area[i]
            if area <= 0.0:
                raise MeshValidationError(f"cell {i} has non-positive area")
            c = self.cell_centroid[i]
            rel = pts - c
            fan = 0.5 * (rel[:, 0] * np.roll(rel[:, 1], -1)
                         - np.roll(rel[:, 0], -1) * rel[:, 1])
            if np.any(fan <= 0.0):
                raise MeshValidationError(
                    f"cell {i} is not star-shaped w.r.t. its centroid"
                )
            if abs(fan.sum() - area) > REL_TOL * area:
                raise MeshValidationError(
                    f"cell {i}: fan-triangle areas do not add up to the cell area"
                )
            # closed-boundary identity: sum of |F| n_TF over the cell sides
            d = np.roll(pts, -1, axis=0) - pts
            resultant = np.array([d[:, 1].sum(), -d[:, 0].sum()])
            scale = np.abs(d).sum()
            if np.abs(resultant).max() > REL_TOL * scale:
                raise MeshValidationError(
                    f"cell {i}: boundary does not close (sum |F| n_TF != 0)"
                )


def d_TF(mesh, cell, edge):
    """Characteristic length |T| / |F| of ``edge`` seen from ``cell``."""
    mesh._local_edge_position(cell, edge)
    return float(mesh.cell_area[cell] / mesh.edge_length[edge])


def cell_flatness(view):
    """Flatness of one cell: diameter over the centroid-ball radius."""
    pts = view.points
    c = view.centroid
    m = len(pts)
    rho = np.inf
    for j in range(m):
        p0 = pts[j]
        p1 = pts[(j + 1) % m]
        d = p1 - p0
        length = np.hypot(d[0], d[1])
        dist = (d[0] * (c[1] - p0[1]) - d[1] * (c[0] - p0[0])) / length
        if dist <= 0.0:
            raise MeshValidationError(
                f"cell {view.index}: centroid lies outside the cell"
            )
        rho = min(rho, dist)
    return view.diameter / rho


def flatness(mesh):
    """Per-cell flatness factors and their mesh-wide maximum.

    The per-cell factor is h_T / rho_T, where rho_T is the radius of the
    largest ball centred at the centroid and contained in the cell (the
    minimum centroid-to-edge-line distance, valid for star-shaped cells).

    Returns
    -------
    (fl_h, fl_T) : the maximum factor and the per-cell array.
    """
    fl = np.empty(mesh.n_cells)
    for i in range(mesh.n_cells):
        fl[i] = cell_flatness(mesh.cell(i))
    return float(fl.max()), fl


def as_cell_view(mesh_or_view, cell=None):
    """Normalize ``(mesh, cell)`` / ``CellView`` arguments to a view."""
    if isinstance(mesh_or_view, CellView):
        return mesh_or_view
    return mesh_or_view.cell(cell)
