"""Signed distance to a triangle mesh that need not be watertight.

The magnitude is the exact distance to the nearest triangle. The sign comes
from a vote over 13 fixed rays: along each ray the signed number of surface
crossings is counted (+1 leaving through a front face, -1 entering), and a
nonzero count is an inside vote. Counting with orientation rather than
parity keeps points inside overlapping closed parts (a limb tube pushed into
a torso tube) classified as inside. Ties go to outside.
"""

import numpy as np

from .. import _kernels
from ..core_math import axis_angle_matrix
from ..errors import EmptyMesh
from ..mesh import bounds_diagonal


def _ray_directions():
    lattice = np.array([
        [1, 0, 0], [0, 1, 0], [0, 0, 1],
        [1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1], [0, 1, 1], [0, 1, -1],
        [1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1],
    ], dtype=np.float64)
    lattice /= np.linalg.norm(lattice, axis=1, keepdims=True)
    # A generic fixed rotation keeps rays off axis-aligned edges and seams.
    rot = axis_angle_matrix(np.array([0.3, 0.7, 0.2]), 0.4)
    return np.ascontiguousarray(lattice @ rot.T)


RAY_DIRECTIONS = _ray_directions()
RAY_DIRECTIONS.setflags(write=False)


def _triangles(m):
    if m.faces.shape[0] == 0:
        raise EmptyMesh("signed distance needs a mesh with faces")
    return m.triangles()


def _as_points(points):
    return np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))


def unsigned_distance(m, points, tris=None):
    tris = _triangles(m) if tris is None else tris
    return np.sqrt(_kernels.point_triangles_min_sq(_as_points(points), tris))


def inside_votes(m, points, tris=None):
    """Number of rays (out of 13) that classify each point as inside."""
    tris = _triangles(m) if tris is None else tris
    counts = _kernels.ray_crossings(_as_points(points), RAY_DIRECTIONS, tris)
    return np.count_nonzero(counts, axis=1)


def sdf_sign(m, points, tris=None):
    votes = inside_votes(m, points, tris)
    return np.where(2 * votes > RAY_DIRECTIONS.shape[0], -1.0, 1.0)


def sdf_eval(m, points):
    """Signed distance of each point; negative inside, positive outside.

    Parameters
    ----------
    m : Mesh
    points : array_like, shape (P, 3)

    Returns
    -------
    ndarray, shape (P,)
    """
    tris = _triangles(m)
    p = _as_points(points)
    return sdf_sign(m, p, tris) * unsigned_distance(m, p, tris)


def sdf_gradient(m, points, h=None):
    """Central-difference gradient of the signed distance.

    The unsigned distance is differenced with step ``h`` (default 1e-4 of
    the bounding-box diagonal) and multiplied by the sign at the centre.
    """
    tris = _triangles(m)
    p = _as_points(points)
    if h is None:
        h = 1e-4 * bounds_diagonal(m)
    sign = sdf_sign(m, p, tris)
    grad = np.empty_like(p)
    for c in range(3):
        e = np.zeros(3)
        e[c] = h
        hi = unsigned_distance(m, p + e, tris)
        lo = unsigned_distance(m, p - e, tris)
        grad[:, c] = (hi - lo) / (2.0 * h)
    return sign[:, None] * grad


def loss_sdf(m, joints):
    """Mean signed distance of the joints (lower means deeper inside)."""
    return float(np.mean(sdf_eval(m, joints)))


def loss_sdf_hinge(m, joints, margin=0.0):
    """Mean of ``max(0, sdf + margin)``: zero once every joint is ``margin`` deep."""
    return float(np.mean(np.maximum(0.0, sdf_eval(m, joints) + margin)))


def loss_sdf_hinge_grad(m, joints, margin=0.0, h=None):
    """Value and per-joint gradient of :func:`loss_sdf_hinge`."""
    p = _as_points(joints)
    d = sdf_eval(m, p)
    active = (d + margin) > 0.0
    grad = np.zeros_like(p)
    if active.any():
        grad[active] = sdf_gradient(m, p[active], h) / p.shape[0]
    return float(np.mean(np.maximum(0.0, d + margin))), grad


__all__ = [
    "RAY_DIRECTIONS", "inside_votes", "loss_sdf", "loss_sdf_hinge", "loss_sdf_hinge_grad",
    "sdf_eval", "sdf_gradient", "sdf_sign", "unsigned_distance",
]
