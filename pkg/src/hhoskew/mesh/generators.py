"""Mesh families on the unit square: Cartesian, hexagonal, locally refined.

All three generators work on integer lattices and divide by the lattice
scale only when emitting coordinates, so shared vertices are bit-identical
across cells and meshes are conforming by construction (up to the hanging
nodes the locally refined family introduces deliberately).
"""

import math
from bisect import bisect_left, bisect_right

import numpy as np

from .core import Mesh

_SQRT3 = math.sqrt(3.0)


def _mesh_from_lattice_loops(loops, xs_scale, ys_scale):
    """Dedup integer lattice loops and build the mesh.

    ``loops`` contains tuples of integer (mx, my) lattice points; physical
    coordinates are mx / xs_scale and my / ys_scale.
    """
    ids = {}
    for loop in loops:
        for p in loop:
            if p not in ids:
                ids[p] = len(ids)
    coords = np.empty((len(ids), 2))
    for (mx, my), vid in ids.items():
        coords[vid, 0] = mx / xs_scale
        coords[vid, 1] = my / ys_scale
    vertex_loops = [[ids[p] for p in loop] for loop in loops]
    return Mesh.from_cell_loops(coords, vertex_loops)


# -- Cartesian ---------------------------------------------------------------

def generate_cartesian(n):
    """Uniform n-by-n square mesh of (0,1)^2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    loops = []
    for j in range(n):
        for i in range(n):
            loops.append([(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)])
    return _mesh_from_lattice_loops(loops, n, n)


# -- hexagonal ----------------------------------------------------------------

def _clip_lattice_polygon(poly, mmax, jmax):
    """Sutherland-Hodgman clip of an integer polygon to [0,mmax]x[0,jmax].

    The hexagon edges have lattice slopes 0 or +-1 per unit step, so every
    intersection with an integer clip line is itself a lattice point.
    """

    def clip(points, coord, bound, keep_leq):
        out = []
        npts = len(points)
        for idx in range(npts):
            a = points[idx]
            b = points[(idx + 1) % npts]
            ina = (a[coord] <= bound) if keep_leq else (a[coord] >= bound)
            inb = (b[coord] <= bound) if keep_leq else (b[coord] >= bound)
            if ina:
                out.append(a)
            if ina != inb:
                other = 1 - coord
                t = (bound - a[coord]) / (b[coord] - a[coord])
                v = a[other] + t * (b[other] - a[other])
                vi = round(v)
                assert abs(v - vi) < 1e-9
                p = (bound, vi) if coord == 0 else (vi, bound)
                out.append(p)
        return out

    for coord, bound, keep_leq in ((0, 0, False), (0, mmax, True),
                                   (1, 0, False), (1, jmax, True)):
        poly = clip(poly, coord, bound, keep_leq)
        if not poly:
            return []
    deduped = []
    for p in poly:
        if not deduped or p != deduped[-1]:
            deduped.append(p)
    if len(deduped) > 1 and deduped[0] == deduped[-1]:
        deduped.pop()
    if len(deduped) < 3:
        return []
    area2 = 0
    for idx in range(len(deduped)):
        ax, ay = deduped[idx]
        bx, by = deduped[(idx + 1) % len(deduped)]
        area2 += ax * by - bx * ay
    if area2 == 0:
        return []
    return deduped


def generate_hexagonal(n, stretch=1.0):
    """Honeycomb mesh of (0,1)^2 with ``n`` columns of hexagons.

    ``stretch = 1`` gives (near-)regular hexagons; ``stretch > 1`` packs
    proportionally more rows into the unit height, flattening every cell
    into a wide, thin hexagon so that the mesh flatness factor grows
    linearly with ``stretch``.  Cells crossing the domain boundary are
    clipped to the unit square (half-hexagons on the top/bottom rows,
    pentagons on the left/right columns).

    Geometry of the lattice: hexagon centers sit on rows y = j/ny with the
    x-offset alternating by half a column period between rows; each hexagon
    spans two row bands and has width 2/(3n), so h = 2/(3n) and the number
    of rows is ny = round(2*sqrt(3)*n*stretch) (regular proportions at
    stretch 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if stretch < 1.0:
        raise ValueError("stretch must be >= 1")
    nx = int(n)
    ny = max(1, round(2.0 * _SQRT3 * nx * stretch))
    mmax = 6 * nx
    loops = []
    for j in range(ny + 1):
        offset = 3 if j % 2 else 0
        i_stop = nx if offset == 0 else nx - 1
        for i in range(i_stop + 1):
            mc = 6 * i + offset
            hexagon = [(mc - 2, j), (mc - 1, j - 1), (mc + 1, j - 1),
                       (mc + 2, j), (mc + 1, j + 1), (mc - 1, j + 1)]
            clipped = _clip_lattice_polygon(hexagon, mmax, ny)
            if clipped:
                loops.append(clipped)
    return _mesh_from_lattice_loops(loops, 6 * nx, ny)


# -- locally refined -----------------------------------------------------------

def generate_locally_refined(base_n, levels):
    """Cartesian base mesh with a recursively quartered lower-left quadrant.

    Pass ``levels`` to split the cells inside [0, 2^-l]^2 into four at each
    step l = 1..levels.  Coarse cells bordering a refined region keep their
    geometric side but store it as several mesh edges (one per finer
    neighbour), which is how hanging nodes are represented.
    """
    if base_n < 2:
        raise ValueError("base_n must be >= 2")
    if levels < 0:
        raise ValueError("levels must be >= 0")
    squares = {(0, i, j) for i in range(base_n) for j in range(base_n)}
    for lev in range(1, levels + 1):
        to_split = [
            (d, i, j)
            for (d, i, j) in squares
            if d == lev - 1
            and (i + 1) << lev <= base_n << d
            and (j + 1) << lev <= base_n << d
        ]
        for sq in to_split:
            squares.remove(sq)
            d, i, j = sq
            for di in (0, 1):
                for dj in (0, 1):
                    squares.add((d + 1, 2 * i + di, 2 * j + dj))
    scale = base_n << levels

    # corner lattice points of every square, grouped per grid line
    points = set()
    sides = []
    for (d, i, j) in squares:
        f = 1 << (levels - d)
        x0, y0, x1, y1 = i * f, j * f, (i + 1) * f, (j + 1) * f
        sides.append((x0, y0, x1, y1))
        points.update([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    on_x = {}
    on_y = {}
    for (px, py) in points:
        on_x.setdefault(px, []).append(py)
        on_y.setdefault(py, []).append(px)
    for vals in on_x.values():
        vals.sort()
    for vals in on_y.values():
        vals.sort()

    def between(sorted_vals, lo, hi):
        return sorted_vals[bisect_right(sorted_vals, lo):bisect_left(sorted_vals, hi)]

    order = sorted(range(len(sides)), key=lambda s: (sides[s][1], sides[s][0]))
    loops = []
    for s in order:
        x0, y0, x1, y1 = sides[s]
        loop = [(x0, y0)]
        loop += [(x, y0) for x in between(on_y[y0], x0, x1)]
        loop.append((x1, y0))
        loop += [(x1, y) for y in between(on_x[x1], y0, y1)]
        loop.append((x1, y1))
        loop += [(x, y1) for x in reversed(between(on_y[y1], x0, x1))]
        loop.append((x0, y1))
        loop += [(x0, y) for y in reversed(between(on_x[x0], y0, y1))]
        loops.append(loop)
    return _mesh_from_lattice_loops(loops, scale, scale)
