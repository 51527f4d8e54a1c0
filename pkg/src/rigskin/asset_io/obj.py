"""Wavefront OBJ reading (vertices and faces only) and writing."""

import numpy as np

from ..errors import IndexOutOfRange, ParseError
from ..mesh import Mesh

_FMT = ".12g"


def _resolve(ref, n_vertices, line, col, source):
    head = ref.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise ParseError(f"bad face index {ref!r}", line, col, source) from None
    if idx > 0:
        k = idx - 1
    elif idx < 0:
        k = n_vertices + idx
    else:
        raise IndexOutOfRange(f"{source + ', ' if source else ''}line {line}, col {col}: "
                              "face index 0 is invalid (OBJ indices are 1-based)")
    if not 0 <= k < n_vertices:
        raise IndexOutOfRange(f"{source + ', ' if source else ''}line {line}, col {col}: "
                              f"face index {idx} out of range ({n_vertices} vertices so far)")
    return k


def parse_obj(text, source=None):
    """Parse OBJ text into a :class:`Mesh`.

    ``v`` and ``f`` records are read; polygons are fan-triangulated and
    negative (relative) indices are resolved against the vertices seen so
    far. Every other record type is ignored.
    """
    verts = []
    faces = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError("vertex needs 3 coordinates", ln, 1, source)
            xyz = []
            for p in parts[1:4]:
                try:
                    x = float(p)
                except ValueError:
                    raise ParseError(f"bad coordinate {p!r}", ln, raw.find(p) + 1,
                                     source) from None
                if not np.isfinite(x):
                    raise ParseError(f"non-finite coordinate {p!r}", ln, raw.find(p) + 1, source)
                xyz.append(x)
            verts.append(xyz)
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError("face needs at least 3 vertices", ln, 1, source)
            idx = []
            col = 0
            for p in parts[1:]:
                col = raw.find(p, col) + 1
                idx.append(_resolve(p, len(verts), ln, col, source))
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
    return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_obj(mesh, vertices=None):
    """OBJ text for ``mesh``; ``vertices`` optionally replaces its positions."""
    v = mesh.vertices if vertices is None else np.asarray(vertices)
    lines = ["v " + " ".join(format(float(x), _FMT) for x in row) for row in v]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


def read_obj(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_obj(fh.read(), source=str(path))


def save_obj(path, mesh, vertices=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_obj(mesh, vertices))
