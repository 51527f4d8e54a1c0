"""Rest-pose triangle mesh, edge extraction and optional per-vertex descriptors."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMesh, IndexOutOfRange, ShapeMismatch


def extract_edges(faces, n_vertices=None):
    """Sorted unique undirected edges ``(i, j)``, ``i < j``, of a triangle list."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if faces.min() < 0 or (n_vertices is not None and faces.max() >= n_vertices):
        raise IndexOutOfRange(f"face index out of range for {n_vertices} vertices")
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    e = e[e[:, 0] != e[:, 1]]
    return np.unique(e, axis=0)


@dataclass(frozen=True, eq=False)
class DescriptorField:
    """Precomputed per-vertex feature matrix, shape (N_V, N_F)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeMismatch(f"descriptors must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("descriptors contain non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def feature_dim(self):
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh in the rest pose.

    Faces with a repeated vertex index are dropped with a warning. Open
    and multi-component meshes are allowed.
    """

    vertices: np.ndarray
    faces: np.ndarray = None
    descriptors: DescriptorField = None
    edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.zeros((0, 3), dtype=np.int64) if self.faces is None else \
            np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size:
            if f.min() < 0 or f.max() >= v.shape[0]:
                raise IndexOutOfRange(f"face index out of range for {v.shape[0]} vertices")
            bad = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if bad.any():
                warnings.warn(f"dropping {int(bad.sum())} degenerate face(s)", stacklevel=3)
                f = f[~bad]
            if v.shape[0] < 3:
                raise EmptyMesh("a mesh with faces needs at least 3 vertices")
        if self.descriptors is not None:
            d = self.descriptors
            if not isinstance(d, DescriptorField):
                d = DescriptorField(d)
            if d.values.shape[0] != v.shape[0]:
                raise ShapeMismatch(
                    f"descriptor rows ({d.values.shape[0]}) != vertex count ({v.shape[0]})")
            object.__setattr__(self, "descriptors", d)
        v.setflags(write=False)
        f.setflags(write=False)
        e = extract_edges(f, v.shape[0])
        e.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "edges", e)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    def triangles(self, vertices=None):
        """Triangle corner positions, shape (F, 3, 3)."""
        v = self.vertices if vertices is None else vertices
        return np.ascontiguousarray(v[self.faces])

    def with_vertices(self, vertices):
        return Mesh(vertices, self.faces, self.descriptors)

    def with_descriptors(self, descriptors):
        return Mesh(self.vertices, self.faces, descriptors)


def mesh_bounds(m):
    """Componentwise ``(min, max)`` over the vertices."""
    v = m.vertices if isinstance(m, Mesh) else np.asarray(m, dtype=np.float64).reshape(-1, 3)
    if v.shape[0] == 0:
        raise EmptyMesh("mesh has no vertices")
    return v.min(axis=0), v.max(axis=0)


def bounds_diagonal(m):
    lo, hi = mesh_bounds(m)
    return float(np.linalg.norm(hi - lo))
