"""
Per-frame motion features, pose reconstruction and linear blend skinning.

Frame features follow the facing-frame convention of :mod:`rigskin.core_math`.
The root rotation is stored relative to the current facing frame, so the
features do not change when the whole scene is yawed or slid along the
ground. Joint positions of both the current and the previous frame are
expressed in the *current* facing frame, which makes ``v`` the world
velocity seen from the character. Root movement ``(dx, dz, dtheta)`` is a
velocity measured in the previous facing frame: ``dx`` along its lateral
axis, ``dz`` along its facing axis.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core_math import (
    UP,
    FacingFrame,
    RigidTransform,
    compute_facing_frame,
    decode_rotation6d,
    encode_rotation6d,
    wrap_angle,
    yaw_matrix,
    yaw_of,
)
from .errors import NonPositiveDt, NotStochastic, ShapeMismatch, SizeMismatch
from .skeleton import PoseTransforms, find_facing_joints, forward_kinematics, skinning_transforms

STOCHASTIC_TOL = 1e-6


@dataclass(frozen=True)
class ContactConfig:
    """A joint is in contact when it is low and slow."""

    height_fraction: float = 0.05
    max_speed: float = 0.15


@dataclass(frozen=True, eq=False)
class TargetPose:
    q_hat: np.ndarray   # (J, 6)
    r_hat: np.ndarray   # (dx, dz, dtheta, h)
    c_hat: np.ndarray   # (J,)


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    q: np.ndarray        # (J, 6), root relative to the facing frame
    p: np.ndarray        # (J, 3) in the current facing frame
    p_prev: np.ndarray   # (J, 3) previous positions, current facing frame
    v: np.ndarray        # (J, 3) length / second
    r: np.ndarray        # (dx, dz, dtheta, h)
    c: np.ndarray        # (J,) in {0, 1}
    facing: FacingFrame

    def target(self):
        return TargetPose(self.q.copy(), self.r.copy(), self.c.copy())


def facing_frame_of(s, positions, joints=None, prev_facing=None):
    """Facing frame of a posed skeleton given its global joint positions."""
    lh, rh, ls, rs = find_facing_joints(s) if joints is None else joints
    p = positions
    return compute_facing_frame(p[lh], p[rh], p[ls], p[rs], p[0], prev_facing=prev_facing)


def compute_frame_features(s, prev_pose, pose, dt, facing_joints=None, contact=None):
    """Motion features of ``pose`` given the previous frame ``prev_pose``.

    Parameters
    ----------
    s : Skeleton
    prev_pose, pose : PoseTransforms
        Single frames from :func:`forward_kinematics` on ``s``.
    dt : float
        Frame interval in seconds.
    """
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    j = len(s)
    for pz in (prev_pose, pose):
        if pz.global_transforms.shape != (j, 4, 4):
            raise SizeMismatch(f"pose does not match a {j}-joint skeleton")
    contact = contact or ContactConfig()
    joints = find_facing_joints(s) if facing_joints is None else facing_joints
    f_prev = facing_frame_of(s, prev_pose.positions, joints)
    f_cur = facing_frame_of(s, pose.positions, joints, prev_facing=f_prev.facing)

    local = np.array(pose.local_rotation)
    local[0] = f_cur.rotation.T @ pose.global_rotations[0]
    q = encode_rotation6d(local)
    p = f_cur.to_local(pose.positions)
    p_prev = f_cur.to_local(prev_pose.positions)
    v = (p - p_prev) / dt

    d = f_cur.origin - f_prev.origin
    r = np.array([
        np.dot(d, f_prev.lateral) / dt,
        np.dot(d, f_prev.facing) / dt,
        wrap_angle(f_cur.yaw - f_prev.yaw) / dt,
        pose.positions[0, 1],
    ])
    height = pose.positions[:, 1]
    speed = np.linalg.norm(v, axis=1)
    thresh = contact.height_fraction * max(s.height(), 1e-12)
    c = ((height < thresh) & (speed < contact.max_speed)).astype(np.int64)
    return FrameFeatures(q, p, p_prev, v, r, c, f_cur)


def reconstruct_pose(s, prev_root, tp, dt=1.0):
    """Rebuild a posed skeleton from a target pose and the previous facing frame.

    ``prev_root`` is the previous frame's facing frame, either as a
    :class:`FacingFrame` or a :class:`RigidTransform` whose rotation is a
    yaw and whose translation lies on the ground plane.
    """
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    q = np.asarray(tp.q_hat, dtype=np.float64)
    if q.shape != (len(s), 6):
        raise SizeMismatch(f"q_hat has shape {q.shape}, expected ({len(s)}, 6)")
    if isinstance(prev_root, RigidTransform):
        origin = np.array(prev_root.translation, dtype=np.float64)
        yaw0 = yaw_of(prev_root.rotation[:, 2])
    else:
        origin = np.array(prev_root.origin, dtype=np.float64)
        yaw0 = prev_root.yaw
    origin = origin - np.dot(origin, UP) * UP
    r0 = yaw_matrix(yaw0)
    dx, dz, dtheta, h = np.asarray(tp.r_hat, dtype=np.float64)
    yaw = yaw0 + dtheta * dt
    origin = origin + (dx * r0[:, 0] + dz * r0[:, 2]) * dt

    local = decode_rotation6d(q)
    local[0] = yaw_matrix(yaw) @ local[0]
    root_pos = origin + h * UP
    return forward_kinematics(s, local, root_pos - s.offsets[0], check=False)


# ---------------------------------------------------------------------------
# Linear blend skinning
# ---------------------------------------------------------------------------


def _weights_array(w):
    return np.asarray(getattr(w, "weights", w), dtype=np.float64)


def check_stochastic(w, tol=STOCHASTIC_TOL):
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol) or np.any(w < -tol):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise NotStochastic(f"weight row {bad} sums to {sums[bad]!r}")


def apply_lbs(mesh, weights, transforms):
    """Deform rest vertices by weight-blended 4x4 joint transforms.

    Parameters
    ----------
    mesh : Mesh or array_like, shape (N, 3)
    weights : SkinningWeights or array_like, shape (N, J)
        Row-stochastic skinning weights.
    transforms : array_like, shape (J, 4, 4)
        Joint transforms relative to the rest pose.

    Returns
    -------
    ndarray, shape (N, 3)
    """
    v = np.ascontiguousarray(getattr(mesh, "vertices", mesh), dtype=np.float64)
    w = np.ascontiguousarray(_weights_array(weights))
    t = np.ascontiguousarray(transforms, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"weights {w.shape} do not match {v.shape[0]} vertices")
    if t.shape != (w.shape[1], 4, 4):
        raise ShapeMismatch(f"transforms {t.shape} do not match {w.shape[1]} joints")
    check_stochastic(w)
    return _kernels.lbs_blend(v, w, t)


def deform_clip(mesh, weights, s, clip):
    """Deform the mesh for every frame of a clip.

    ``clip`` is a :class:`PoseTransforms` with a leading frame dimension.
    Returns an array of shape (F, N, 3).
    """
    rest = forward_kinematics(s)
    ts = skinning_transforms(rest, clip)
    if ts.ndim == 3:
        ts = ts[None]
    return np.stack([apply_lbs(mesh, weights, ts[f]) for f in range(ts.shape[0])])


def clip_features(s, clip, dt, facing_joints=None, contact=None):
    """Features for frames 1..F-1 of a clip (frame 0 has no predecessor)."""
    return [compute_frame_features(s, clip.frame(t - 1), clip.frame(t), dt,
                                   facing_joints, contact) for t in range(1, len(clip))]


__all__ = [
    "ContactConfig", "FrameFeatures", "TargetPose", "PoseTransforms", "apply_lbs",
    "check_stochastic", "clip_features", "compute_frame_features", "deform_clip",
    "facing_frame_of", "reconstruct_pose",
]
