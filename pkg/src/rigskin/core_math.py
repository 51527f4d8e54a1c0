"""
Rotation representations, rigid transforms and the character facing frame.

Conventions
-----------
* World up-axis is +y and the ground plane is y = 0 (``UP``).
* Rotation matrices act on column vectors.
* A 6D rotation stores the first two matrix columns, ``[a, b]``, as a
  length-6 array (leading batch dimensions allowed).
* The facing frame is right-handed with columns ``(lateral, up, facing)``;
  lateral points from the character's right to its left and
  ``facing = lateral x up``. A character whose left is +x faces +z.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateFrame, DegenerateRotation, NotARotation

UP = np.array([0.0, 1.0, 0.0])
WORLD_FORWARD = np.array([0.0, 0.0, 1.0])

# Smallest allowed angle between the two 6D columns.
_MIN_6D_ANGLE = 1e-6
_ROT_TOL = 1e-6


@dataclass(frozen=True)
class Rotation6D:
    """First two columns of a rotation matrix."""

    a: np.ndarray
    b: np.ndarray

    def as_array(self):
        return np.concatenate([np.asarray(self.a, float), np.asarray(self.b, float)])


def _as6(r):
    if isinstance(r, Rotation6D):
        return r.as_array()
    return np.asarray(r, dtype=np.float64)


def decode_rotation6d(r):
    """Gram-Schmidt a 6D rotation into a 3x3 matrix.

    Parameters
    ----------
    r : Rotation6D or array_like, shape (..., 6)

    Returns
    -------
    ndarray, shape (..., 3, 3)
    """
    r6 = _as6(r)
    if r6.shape[-1] != 6:
        raise DegenerateRotation(f"expected trailing dimension 6, got {r6.shape}")
    if not np.all(np.isfinite(r6)):
        raise DegenerateRotation("non-finite 6D rotation")
    a = r6[..., :3]
    b = r6[..., 3:]
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    if np.any(na < 1e-12) or np.any(nb < 1e-12):
        raise DegenerateRotation("6D rotation column is (near) zero")
    c1 = a / na[..., None]
    b_perp = b - np.sum(c1 * b, axis=-1, keepdims=True) * c1
    nbp = np.linalg.norm(b_perp, axis=-1)
    if np.any(nbp <= np.sin(_MIN_6D_ANGLE) * nb):
        raise DegenerateRotation("6D rotation columns are parallel")
    c2 = b_perp / nbp[..., None]
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


def is_rotation(m, tol=_ROT_TOL):
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-2:] != (3, 3) or not np.all(np.isfinite(m)):
        return False
    eye = np.eye(3)
    gram = np.swapaxes(m, -1, -2) @ m
    return bool(np.all(np.abs(gram - eye) <= tol) and np.all(np.abs(np.linalg.det(m) - 1.0) <= tol))


def encode_rotation6d(m):
    """Take the first two columns of rotation matrices, shape (..., 3, 3) -> (..., 6)."""
    m = np.asarray(m, dtype=np.float64)
    if not is_rotation(m):
        raise NotARotation("matrix is not orthonormal with determinant +1")
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def axis_angle_matrix(axis, angle):
    """Rotation about ``axis`` by ``angle`` radians (Rodrigues)."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c = np.cos(angle)
    s = np.sin(angle)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def yaw_matrix(theta):
    """Rotation by ``theta`` radians about the up-axis."""
    c = np.cos(theta)
    s = np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def yaw_of(direction):
    """Heading angle of a horizontal direction; 0 for +z, pi/2 for +x."""
    return float(np.arctan2(direction[0], direction[2]))


def wrap_angle(theta):
    return float((theta + np.pi) % (2.0 * np.pi) - np.pi)


def euler_to_matrix(angles, order, degrees=True):
    """Intrinsic Euler angles in channel order, e.g. ``"ZXY"`` -> R = Rz @ Rx @ Ry."""
    return Rotation.from_euler(order.upper(), angles, degrees=degrees).as_matrix()


def matrix_to_euler(m, order, degrees=True):
    """Inverse of :func:`euler_to_matrix`."""
    with warnings.catch_warnings():
        # gimbal lock is fine, scipy still returns a valid decomposition
        warnings.simplefilter("ignore", UserWarning)
        return Rotation.from_matrix(m).as_euler(order.upper(), degrees=degrees)


# ---------------------------------------------------------------------------
# Rigid transforms as 4x4 homogeneous matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3].copy(), m[:3, 3].copy())

    def matrix(self):
        return make_transform(self.rotation, self.translation)

    def apply(self, points):
        return np.asarray(points) @ self.rotation.T + self.translation

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def __matmul__(self, other):
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)


def make_transform(rotation=None, translation=None):
    """Build a (..., 4, 4) homogeneous transform."""
    if rotation is None:
        rotation = np.eye(3)
    rotation = np.asarray(rotation, dtype=np.float64)
    batch = rotation.shape[:-2]
    out = np.zeros(batch + (4, 4))
    out[..., :3, :3] = rotation
    if translation is not None:
        out[..., :3, 3] = translation
    out[..., 3, 3] = 1.0
    return out


def invert_transform(t):
    """Inverse of rigid (..., 4, 4) transforms."""
    t = np.asarray(t, dtype=np.float64)
    rt = np.swapaxes(t[..., :3, :3], -1, -2)
    out = np.zeros_like(t)
    out[..., :3, :3] = rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", rt, t[..., :3, 3])
    out[..., 3, 3] = 1.0
    return out


def transform_points(t, points):
    t = np.asarray(t)
    return np.asarray(points) @ t[:3, :3].T + t[:3, 3]


# ---------------------------------------------------------------------------
# Facing frame
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FacingFrame:
    origin: np.ndarray
    lateral: np.ndarray
    up: np.ndarray
    facing: np.ndarray

    @property
    def rotation(self):
        """Local-to-world rotation with columns (lateral, up, facing)."""
        return np.stack([self.lateral, self.up, self.facing], axis=-1)

    @property
    def yaw(self):
        return yaw_of(self.facing)

    def to_local(self, points):
        return (np.asarray(points) - self.origin) @ self.rotation

    def to_world(self, points):
        return np.asarray(points) @ self.rotation.T + self.origin

    def transform(self):
        return make_transform(self.rotation, self.origin)

    @classmethod
    def from_yaw(cls, origin, theta):
        r = yaw_matrix(theta)
        origin = np.array(origin, dtype=np.float64)
        origin[1] = 0.0
        return cls(origin, r[:, 0], r[:, 1].copy(), r[:, 2])


def compute_facing_frame(left_hip, right_hip, left_shoulder, right_shoulder, root,
                         prev_facing=None, strict=False):
    """Character-centric frame from hip and shoulder positions.

    The lateral direction is the equal-weight average of the left-minus-right
    hip and shoulder vectors. When it is parallel to the up-axis the previous
    frame's facing direction (if given) or world +z is reused, unless
    ``strict`` is set, in which case :class:`DegenerateFrame` is raised.
    """
    lh, rh, ls, rs, root = (np.asarray(v, dtype=np.float64) for v in
                            (left_hip, right_hip, left_shoulder, right_shoulder, root))
    hip = lh - rh
    shoulder = ls - rs
    if np.linalg.norm(hip) < 1e-12 or np.linalg.norm(shoulder) < 1e-12:
        raise DegenerateFrame("hip or shoulder pair coincides")
    lateral = 0.5 * (hip + shoulder)
    facing = np.cross(lateral, UP)
    n = np.linalg.norm(facing)
    if n < 1e-9 * max(1.0, np.linalg.norm(lateral)):
        if strict:
            raise DegenerateFrame("lateral direction is parallel to the up-axis")
        warnings.warn("degenerate facing frame, reusing fallback direction", stacklevel=2)
        facing = WORLD_FORWARD if prev_facing is None else np.asarray(prev_facing, float)
        facing = facing - np.dot(facing, UP) * UP
        facing = facing / np.linalg.norm(facing)
    else:
        facing = facing / n
    lateral = np.cross(UP, facing)
    origin = root - np.dot(root, UP) * UP
    return FacingFrame(origin, lateral, UP.copy(), facing)
