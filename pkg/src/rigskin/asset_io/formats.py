"""Skeleton JSON, skinning-weight and descriptor text formats.

Skeleton JSON::

    {"names": [...], "parents": [-1, 0, ...], "offsets": [[x, y, z], ...],
     "rho": [...]}                      # rho optional

Weights (one header line, then one row of N_J floats per vertex)::

    joints Hips LeftUpLeg ...
    1 0 ...

Descriptors (header carries the shape)::

    descriptors <N_V> <N_F>
    f f f ...
"""

import json

import numpy as np

from ..errors import NotStochastic, ParseError, SchemaError, ShapeMismatch
from ..mesh import DescriptorField
from ..skeleton import Skeleton

WRITE_TOL = 1e-6
READ_DRIFT_TOL = 1e-4


def _num(x):
    return format(float(x), ".17g")


# -- skeleton json ------------------------------------------------------------


def skeleton_to_dict(s):
    return {
        "names": list(s.names),
        "parents": [int(p) for p in s.parents],
        "offsets": [[float(x) for x in o] for o in s.offsets],
        "rho": [int(r) for r in s.rho],
    }


def write_skeleton_json(s):
    return json.dumps(skeleton_to_dict(s), indent=2) + "\n"


def _topological(names, parents, offsets, rho):
    """Reorder joints so parents precede children (depth-first, input order)."""
    j = len(names)
    roots = [k for k in range(j) if parents[k] < 0]
    if len(roots) != 1:
        raise SchemaError(f"expected exactly one root, found {len(roots)}")
    kids = [[] for _ in range(j)]
    for k in range(j):
        if parents[k] >= 0:
            if parents[k] >= j:
                raise SchemaError(f"parent index {parents[k]} out of range")
            kids[parents[k]].append(k)
    order = []
    stack = [roots[0]]
    while stack:
        k = stack.pop()
        order.append(k)
        stack.extend(reversed(kids[k]))
    if len(order) != j:
        raise SchemaError("parents contain a cycle or disconnected joints")
    pos = np.empty(j, dtype=np.int64)
    pos[order] = np.arange(j)
    new_parents = [-1 if parents[k] < 0 else int(pos[parents[k]]) for k in order]
    new_rho = None if rho is None else [int(pos[rho[k]]) for k in order]
    return [names[k] for k in order], new_parents, [offsets[k] for k in order], new_rho


def parse_skeleton_json(text, source=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, exc.lineno, exc.colno, source) from None
    if not isinstance(data, dict):
        raise SchemaError("top level must be an object", source=source)
    for key in ("names", "parents", "offsets"):
        if key not in data:
            raise SchemaError(f"missing key {key!r}", source=source)
    names, parents, offsets = data["names"], data["parents"], data["offsets"]
    rho = data.get("rho")
    if not (isinstance(names, list) and all(isinstance(n, str) for n in names)):
        raise SchemaError("'names' must be a list of strings", source=source)
    if not (isinstance(parents, list) and all(isinstance(p, int) and not isinstance(p, bool)
                                              for p in parents)):
        raise SchemaError("'parents' must be a list of integers", source=source)
    try:
        off = np.array(offsets, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError("'offsets' must be a list of 3-vectors", source=source) from None
    if off.ndim != 2 or off.shape[1] != 3 or off.shape[0] != len(names):
        raise SchemaError("'offsets' must hold one 3-vector per joint", source=source)
    if len(parents) != len(names):
        raise SchemaError("'parents' and 'names' differ in length", source=source)
    if rho is not None:
        if not (isinstance(rho, list) and len(rho) == len(names)
                and all(isinstance(r, int) and 0 <= r < len(names) for r in rho)):
            raise SchemaError("'rho' must be a list of joint indices", source=source)
    n2, p2, o2, r2 = _topological(names, parents, list(off), rho)
    try:
        return Skeleton(n2, p2, o2, r2)
    except ValueError as exc:
        raise SchemaError(str(exc), source=source) from None


def read_skeleton_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_skeleton_json(fh.read(), source=str(path))


def save_skeleton_json(path, s):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_skeleton_json(s))


# -- skinning weights -----------------------------------------------------------


def write_weights(weights, joint_names):
    w = np.asarray(getattr(weights, "weights", weights), dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != len(joint_names):
        raise ShapeMismatch(f"weights {w.shape} vs {len(joint_names)} joint names")
    if any(not n or any(c.isspace() for c in n) for n in joint_names):
        raise ValueError("joint names must be non-empty and contain no whitespace")
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > WRITE_TOL) or np.any(w < 0):
        raise NotStochastic("weights must be row-stochastic to be written")
    lines = ["joints " + " ".join(joint_names)]
    lines += [" ".join(_num(x) for x in row) for row in w]
    return "\n".join(lines) + "\n"


def parse_weights(text, source=None, n_vertices=None, joint_names=None):
    """Read a weight file; returns ``(weights, joint_names)``.

    When ``joint_names`` is given and the file lists the same joints in a
    different order, columns are permuted to follow ``joint_names``.

    Rows whose sum drifts from 1 by at most 1e-4 are renormalized; larger
    drift raises :class:`NotStochastic`.
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("joints"):
        raise ParseError("first line must be 'joints <name> ...'", 1, 1, source)
    names = lines[0].split()[1:]
    if not names:
        raise ParseError("header lists no joints", 1, 1, source)
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != len(names):
            raise ParseError(f"row has {len(parts)} values, expected {len(names)}", ln, 1, source)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError("bad number in weight row", ln, 1, source) from None
    w = np.array(rows, dtype=np.float64).reshape(-1, len(names))
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise NotStochastic("weights must be finite and non-negative")
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > READ_DRIFT_TOL):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise NotStochastic(f"row {bad} sums to {sums[bad]!r}")
    w = w / sums[:, None]
    if n_vertices is not None and w.shape[0] != n_vertices:
        raise ShapeMismatch(f"{w.shape[0]} weight rows for {n_vertices} vertices")
    if joint_names is not None and list(joint_names) != names:
        if sorted(joint_names) != sorted(names):
            raise ShapeMismatch("weight file joints do not match the skeleton")
        col = {n: k for k, n in enumerate(names)}
        names = list(joint_names)
        w = w[:, [col[n] for n in names]]
    return w, names


def read_weights(path, mesh=None, skeleton=None):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_weights(text, str(path),
                         None if mesh is None else mesh.n_vertices,
                         None if skeleton is None else skeleton.names)


def save_weights(path, weights, joint_names):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_weights(weights, joint_names))


# -- descriptors --------------------------------------------------------------


def write_descriptors(field):
    v = np.asarray(getattr(field, "values", field), dtype=np.float64)
    lines = [f"descriptors {v.shape[0]} {v.shape[1]}"]
    lines += [" ".join(_num(x) for x in row) for row in v]
    return "\n".join(lines) + "\n"


def parse_descriptors(text, source=None, n_vertices=None):
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[0] != "descriptors":
        raise ParseError("first line must be 'descriptors <N_V> <N_F>'", 1, 1, source)
    try:
        nv, nf = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("bad descriptor shape in header", 1, 1, source) from None
    body = [(ln, l) for ln, l in enumerate(lines[1:], start=2) if l.strip()]
    if len(body) != nv:
        raise ParseError(f"header declares {nv} rows, found {len(body)}", len(lines), 1, source)
    vals = np.empty((nv, nf))
    for r, (ln, line) in enumerate(body):
        parts = line.split()
        if len(parts) != nf:
            raise ParseError(f"row has {len(parts)} values, expected {nf}", ln, 1, source)
        try:
            vals[r] = [float(p) for p in parts]
        except ValueError:
            raise ParseError("bad number in descriptor row", ln, 1, source) from None
        if not np.all(np.isfinite(vals[r])):
            raise ParseError("non-finite value in descriptor row", ln, 1, source)
    if n_vertices is not None and nv != n_vertices:
        raise ShapeMismatch(f"descriptor file has {nv} rows for a {n_vertices}-vertex mesh")
    return DescriptorField(vals)


def read_descriptors(path, mesh=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_descriptors(fh.read(), str(path),
                                 None if mesh is None else mesh.n_vertices)


def save_descriptors(path, field):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_descriptors(field))
