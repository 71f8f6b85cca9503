"""Mesh file formats.

native
    Plain text.  ``VERTICES n`` followed by n ``x y`` lines, ``EDGES m``
    followed by m ``v0 v1`` lines (0-based vertex ids), ``CELLS c`` followed
    by c lines ``k e1 ... ek`` (0-based edge ids, counterclockwise).  ``#``
    starts a comment.  Coordinates are written with ``repr`` so a
    save/load round trip is bit-identical.

fvca5-typ2
    The 2D benchmark text format: a ``vertices`` section (count, then
    ``x y`` lines) and cell sections named after the polygon kind
    (``triangles``, ``quadrangles``, ..., ``hexagons``) holding 1-based
    vertex ids per cell.  ``edges`` / ``centers`` sections are skipped.
    Edges are inferred from the cell-vertex connectivity.
"""

import numpy as np

from ..errors import MeshFormatError, MeshValidationError
from .core import Mesh

_FVCA5_CELL_SECTIONS = {
    "triangles": 3,
    "quadrangles": 4,
    "pentagons": 5,
    "hexagons": 6,
    "heptagons": 7,
    "octagons": 8,
}
_FVCA5_SKIP_SECTIONS = {"edges", "centers", "centres"}


def _tokens(path):
    """Yield whitespace tokens, dropping ``#`` comments."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            yield from line.split()


def load_mesh(path, format="native"):
    """Load a mesh file. ``format`` is ``"native"`` or ``"fvca5-typ2"``."""
    if format == "native":
        return _load_native(path)
    if format == "fvca5-typ2":
        return _load_fvca5_typ2(path)
    raise MeshFormatError(f"unknown mesh format {format!r}")


def save_native(mesh, path):
    """Write a mesh in the native format (round-trip exact coordinates)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"VERTICES {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"EDGES {mesh.n_edges}\n")
        for a, b in mesh.edge_vertices:
            fh.write(f"{a} {b}\n")
        fh.write(f"CELLS {mesh.n_cells}\n")
        for eids in mesh.cell_edges:
            fh.write(f"{len(eids)} " + " ".join(str(int(e)) for e in eids) + "\n")


def _load_native(path):
    toks = _tokens(path)

    def expect(word):
        try:
            got = next(toks)
        except StopIteration:
            raise MeshFormatError(f"{path}: unexpected end of file, expected {word}")
        if got.upper() != word:
            raise MeshFormatError(f"{path}: expected {word}, got {got!r}")

    def read_int():
        try:
            return int(next(toks))
        except (StopIteration, ValueError) as exc:
            raise MeshFormatError(f"{path}: malformed integer") from exc

    def read_float():
        try:
            return float(next(toks))
        except (StopIteration, ValueError) as exc:
            raise MeshFormatError(f"{path}: malformed coordinate") from exc

    expect("VERTICES")
    nv = read_int()
    vertices = np.array([[read_float(), read_float()] for _ in range(nv)])
    expect("EDGES")
    ne = read_int()
    edges = np.array([[read_int(), read_int()] for _ in range(ne)], dtype=np.int64)
    if ne and (edges.min() < 0 or edges.max() >= nv):
        raise MeshFormatError(f"{path}: edge vertex id out of range")
    expect("CELLS")
    nc = read_int()
    cells = []
    for _ in range(nc):
        k = read_int()
        if k < 3:
            raise MeshFormatError(f"{path}: cell with fewer than 3 edges")
        eids = [read_int() for _ in range(k)]
        if min(eids) < 0 or max(eids) >= ne:
            raise MeshFormatError(f"{path}: cell edge id out of range")
        cells.append(eids)
    loops = [_chain_edges(edges, eids, path) for eids in cells]
    return Mesh.from_cell_loops(vertices, loops)


def _chain_edges(edges, eids, path):
    """Recover the vertex loop of a cell from its ordered edge list."""
    first = edges[eids[0]]
    for start in (first[0], first[1]):
        loop = [start, first[0] + first[1] - start]
        ok = True
        for eid in eids[1:]:
            a, b = edges[eid]
            if a == loop[-1]:
                loop.append(b)
            elif b == loop[-1]:
                loop.append(a)
            else:
                ok = False
                break
        if ok and loop[-1] == loop[0]:
            return loop[:-1]
    raise MeshValidationError(
        f"{path}: cell edges {list(map(int, eids))} do not form a closed loop"
    )


def _load_fvca5_typ2(path):
    toks = list(_tokens(path))
    pos = 0

    def read_int():
        nonlocal pos
        try:
            val = int(toks[pos])
        except (IndexError, ValueError) as exc:
            raise MeshFormatError(f"{path}: malformed integer") from exc
        pos += 1
        return val

    def read_float():
        nonlocal pos
        try:
            val = float(toks[pos])
        except (IndexError, ValueError) as exc:
            raise MeshFormatError(f"{path}: malformed coordinate") from exc
        pos += 1
        return val

    vertices = None
    loops = []
    while pos < len(toks):
        section = toks[pos].lower()
        pos += 1
        if section == "vertices":
            nv = read_int()
            vertices = np.array([[read_float(), read_float()] for _ in range(nv)])
        elif section in _FVCA5_CELL_SECTIONS:
            nvert = _FVCA5_CELL_SECTIONS[section]
            count = read_int()
            for _ in range(count):
                loops.append([read_int() - 1 for _ in range(nvert)])
        elif section in _FVCA5_SKIP_SECTIONS:
            count = read_int()
            while pos < len(toks):
                try:
                    float(toks[pos])
                except ValueError:
                    break
                pos += 1
        else:
            raise MeshFormatError(f"{path}: unknown section {section!r}")
    if vertices is None:
        raise MeshFormatError(f"{path}: missing vertices section")
    if not loops:
        raise MeshFormatError(f"{path}: no cell section found")
    for loop in loops:
        if min(loop) < 0 or max(loop) >= len(vertices):
            raise MeshFormatError(f"{path}: cell vertex id out of range")
    return Mesh.from_cell_loops(vertices, loops)


def save_fvca5_typ2(mesh, path):
    """Write cells grouped by vertex count in the fvca5-typ2 layout."""
    groups = {}
    for loop in mesh.cell_loops:
        groups.setdefault(len(loop), []).append(loop)
    names = {v: k for k, v in _FVCA5_CELL_SECTIONS.items()}
    unknown = [n for n in groups if n not in names]
    if unknown:
        raise MeshFormatError(
            f"fvca5-typ2 cannot store cells with {unknown} vertices"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"vertices\n{mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for nvert in sorted(groups):
            fh.write(f"{names[nvert]}\n{len(groups[nvert])}\n")
            for loop in groups[nvert]:
                fh.write(" ".join(str(int(v) + 1) for v in loop) + "\n")
