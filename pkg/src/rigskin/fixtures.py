"""
Synthetic characters with ground-truth rigs, skinning weights and clips.

Meshes are built as one tube per bone. Each tube is a stack of polygonal
rings around the bone axis, extended a fixed overhang past both joints and
closed by fan caps, so every joint sits inside the surface. The two-bone
cylinder is the exception: it is a single open tube whose vertex count is
exactly ``n_rings * ring_resolution``.

Biped characters face +z with their left side at +x, their toe joints on
the ground plane y = 0, and are mirror symmetric about x = 0 down to the
last bit: right-side joints and vertices are exact x-negations of the left
side, and ``vertex_mirror`` pairs them.

Ground-truth weights
--------------------
Each bone (parent -> child) belongs to its parent joint. For a vertex with
distances ``d_a <= d_b`` to its two nearest bones::

    w_b = 0.5 * (1 - smoothstep(0, width, d_b - d_a))
    w_a = 1 - w_b

and the two values are added to the owning joints' columns.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core_math import axis_angle_matrix, euler_to_matrix
from .errors import InvalidConfig
from .mesh import Mesh
from .skeleton import PoseTransforms, Skeleton, forward_kinematics, toe_joints

TEMPLATES = ("biped_simple", "biped_branchy", "two_bone_cylinder")
CLIP_KINDS = ("wave", "crouch", "random_smooth")


@dataclass(frozen=True)
class CharacterParams:
    """Generator settings; radii are in skeleton length units."""

    ring_resolution: int = 8
    n_rings: int = 8              # two_bone_cylinder only
    rings_per_bone: int = 5       # tube templates
    radius_scale: float = 1.0
    falloff_width: float = None   # default: 0.3 bone length (cylinder), 0.05 (bipeds)
    bone_length: float = 1.0      # two_bone_cylinder
    cylinder_radius: float = 0.25
    tube_extension: float = 0.05  # tube overhang past each joint
    proportion_jitter: float = 0.05
    clip_frames: int = 24
    frame_time: float = 1.0 / 30.0

    def validate(self, template):
        if template not in TEMPLATES:
            raise InvalidConfig(f"unknown template {template!r}; expected one of {TEMPLATES}")
        if self.ring_resolution < 3:
            raise InvalidConfig("ring_resolution must be at least 3")
        if template != "two_bone_cylinder" and self.ring_resolution % 2:
            raise InvalidConfig("biped templates need an even ring_resolution")
        if self.n_rings < 2 or self.rings_per_bone < 2:
            raise InvalidConfig("tubes need at least 2 rings")
        if not (self.radius_scale > 0 and self.bone_length > 0 and self.cylinder_radius > 0
                and self.tube_extension > 0):
            raise InvalidConfig("radii and lengths must be positive")
        if self.falloff_width is not None and not self.falloff_width > 0:
            raise InvalidConfig("falloff_width must be positive")
        if not 0 <= self.proportion_jitter < 0.5:
            raise InvalidConfig("proportion_jitter must be in [0, 0.5)")
        if self.clip_frames < 1 or not self.frame_time > 0:
            raise InvalidConfig("clip_frames >= 1 and frame_time > 0 required")


@dataclass(frozen=True, eq=False)
class SyntheticCharacter:
    skeleton: Skeleton
    mesh: Mesh
    gt_weights: np.ndarray
    gt_clips: list
    vertex_mirror: np.ndarray = None
    template: str = ""
    frame_time: float = 1.0 / 30.0
    params: CharacterParams = field(default_factory=CharacterParams)


# ---------------------------------------------------------------------------
# Skeleton templates
# ---------------------------------------------------------------------------

# (name, parent, rest position, radius of the tube ending at the joint) for
# the centre line and left side; right-side joints are mirrored copies.
_BIPED_CENTER = [
    ("Hips", None, (0.0, 1.00, 0.0), 0.11),
    ("Spine", "Hips", (0.0, 1.25, 0.0), 0.11),
    ("Neck", "Spine", (0.0, 1.50, 0.0), 0.11),
    ("Head", "Neck", (0.0, 1.62, 0.0), 0.05),
    ("Head_end", "Head", (0.0, 1.82, 0.0), 0.09),
]
_BIPED_LEFT = [
    ("LeftShoulder", "Spine", (0.16, 1.42, 0.0), 0.05),
    ("LeftArm", "LeftShoulder", (0.28, 1.42, 0.0), 0.05),
    ("LeftForeArm", "LeftArm", (0.54, 1.42, 0.0), 0.05),
    ("LeftHand", "LeftForeArm", (0.78, 1.42, 0.0), 0.05),
    ("LeftHand_end", "LeftHand", (0.90, 1.42, 0.0), 0.05),
    ("LeftUpLeg", "Hips", (0.11, 0.88, 0.0), 0.07),
    ("LeftLeg", "LeftUpLeg", (0.11, 0.52, 0.0), 0.07),
    ("LeftFoot", "LeftLeg", (0.11, 0.10, 0.0), 0.06),
    ("LeftToeBase", "LeftFoot", (0.11, 0.04, 0.12), 0.06),
    ("LeftToe_end", "LeftToeBase", (0.11, 0.00, 0.24), 0.05),
]
_BRANCHY_CENTER = [
    ("Hips", None, (0.0, 1.00, 0.0), 0.11),
    ("Spine", "Hips", (0.0, 1.12, 0.0), 0.11),
    ("Spine1", "Spine", (0.0, 1.26, 0.0), 0.11),
    ("Spine2", "Spine1", (0.0, 1.38, 0.0), 0.11),
    ("Neck", "Spine2", (0.0, 1.50, 0.0), 0.11),
    ("Head", "Neck", (0.0, 1.62, 0.0), 0.05),
    ("Head_end", "Head", (0.0, 1.82, 0.0), 0.09),
    ("Tail", "Hips", (0.0, 0.96, -0.16), 0.05),
    ("Tail_end", "Tail", (0.0, 0.88, -0.32), 0.05),
]
_BRANCHY_LEFT = [
    ("LeftShoulder", "Spine2", (0.16, 1.42, 0.0), 0.05),
    ("LeftArm", "LeftShoulder", (0.28, 1.42, 0.0), 0.05),
    ("LeftForeArm", "LeftArm", (0.54, 1.42, 0.0), 0.05),
    ("LeftHand", "LeftForeArm", (0.78, 1.42, 0.0), 0.05),
    ("LeftHandIndex1", "LeftHand", (0.90, 1.42, 0.0), 0.05),
    ("LeftHandIndex_end", "LeftHandIndex1", (1.02, 1.42, 0.0), 0.05),
    ("LeftHandThumb1", "LeftHand", (0.86, 1.42, 0.10), 0.05),
    ("LeftHandThumb_end", "LeftHandThumb1", (0.92, 1.42, 0.21), 0.05),
    ("LeftUpLeg", "Hips", (0.11, 0.88, 0.0), 0.07),
    ("LeftLeg", "LeftUpLeg", (0.11, 0.52, 0.0), 0.07),
    ("LeftFoot", "LeftLeg", (0.11, 0.10, 0.0), 0.06),
    ("LeftToeBase", "LeftFoot", (0.11, 0.04, 0.12), 0.06),
    ("LeftToe_end", "LeftToeBase", (0.11, 0.00, 0.24), 0.05),
]


def _mirror_name(name):
    return "Right" + name[4:] if name.startswith("Left") else name


def _biped_table(center, left):
    rows = list(center)
    rows += left
    rows += [(_mirror_name(n), _mirror_name(p), (-x, y, z), r) for n, p, (x, y, z), r in left]
    names = [r[0] for r in rows]
    index = {n: k for k, n in enumerate(names)}
    parents = [-1 if r[1] is None else index[r[1]] for r in rows]
    pos = np.array([r[2] for r in rows], dtype=np.float64)
    radius = np.array([r[3] for r in rows], dtype=np.float64)
    rho = [index[_mirror_name(n)] if n.startswith("Left") else
           (index["Left" + n[5:]] if n.startswith("Right") else k) for k, n in enumerate(names)]
    return names, parents, pos, radius, rho


def _jittered(names, parents, pos, rho, jitter, rng):
    """Scale each symmetric pair of bones by a common random factor."""
    offsets = pos.copy()
    offsets[1:] = pos[1:] - pos[np.asarray(parents[1:])]
    if jitter > 0:
        for k in range(1, len(names)):
            m = rho[k]
            if m < k:
                continue
            f = 1.0 + jitter * rng.uniform(-1.0, 1.0)
            offsets[k] = offsets[k] * f
            if m != k:
                offsets[m] = offsets[k] * np.array([-1.0, 1.0, 1.0])
    s = Skeleton(names, parents, offsets, rho)
    # ground on the toes
    toes = toe_joints(s)
    off = np.array(s.offsets)
    off[0, 1] -= s.g[toes, 1].min()
    return s.replace(offsets=off)


# ---------------------------------------------------------------------------
# Tube meshes
# ---------------------------------------------------------------------------


def _ring_basis(d, center_plane):
    """Unit vectors ``u, w`` with ``u x w = d``; ``u`` in the x = 0 plane if asked."""
    if center_plane:
        u = np.array([0.0, -d[2], d[1]])
    else:
        ref = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        u = ref - np.dot(ref, d) * d
    u /= np.linalg.norm(u)
    w = np.cross(d, u)
    return u, w


def _tube(a, b, radius, n_res, n_rings, ext, center_plane, caps=True):
    """Vertices and faces of a tube from ``a - ext*d`` to ``b + ext*d``."""
    d = b - a
    length = np.linalg.norm(d)
    d = d / length
    u, w = _ring_basis(d, center_plane)
    half = n_res // 2
    ang = 2.0 * np.pi * np.arange(n_res) / n_res
    cs, sn = np.cos(ang), np.sin(ang)
    if center_plane:
        # exact mirror pairing k <-> n_res - k about the x = 0 plane
        cs[half + 1:] = cs[1:n_res - half][::-1]
        sn[half + 1:] = -sn[1:n_res - half][::-1]
        sn[0] = 0.0
        sn[half] = 0.0
    t = np.linspace(-ext, length + ext, n_rings)
    ring = radius * (cs[:, None] * u + sn[:, None] * w)
    verts = (a + t[:, None, None] * d + ring[None]).reshape(-1, 3)
    faces = []
    for i in range(n_rings - 1):
        for k in range(n_res):
            p0 = i * n_res + k
            p1 = i * n_res + (k + 1) % n_res
            q0 = p0 + n_res
            q1 = p1 + n_res
            faces.append((p0, p1, q1))
            faces.append((p0, q1, q0))
    if caps:
        s = len(verts)
        e = s + 1
        verts = np.vstack([verts, a - ext * d, b + ext * d])
        if center_plane:
            verts[s:, 0] = 0.0
        last = (n_rings - 1) * n_res
        for k in range(n_res):
            k1 = (k + 1) % n_res
            faces.append((s, k1, k))
            faces.append((e, last + k, last + k1))
    return verts, np.array(faces, dtype=np.int64)


def _tube_mesh(s, radius, params):
    """One capped tube per bone; right-side tubes mirror the left ones exactly."""
    g = s.g
    n_res = params.ring_resolution
    parts = {}
    vmirror_local = {}
    for c in range(1, len(s)):
        m = int(s.rho[c])
        if m < c and m != c:
            continue
        p = int(s.parents[c])
        r = radius[c] * params.radius_scale
        v, f = _tube(g[p], g[c], r, n_res, params.rings_per_bone, params.tube_extension,
                     center_plane=(m == c))
        parts[c] = (v, f)
        if m == c:
            perm = np.arange(len(v))
            rings = perm[: params.rings_per_bone * n_res].reshape(-1, n_res)
            rings = np.concatenate([rings[:, :1], rings[:, 1:][:, ::-1]], axis=1)
            perm[: params.rings_per_bone * n_res] = rings.reshape(-1)
            vmirror_local[c] = perm
    for c in range(1, len(s)):
        m = int(s.rho[c])
        if m < c and m != c:
            v, f = parts[m]
            parts[c] = (v * np.array([-1.0, 1.0, 1.0]), f[:, ::-1].copy())
    starts = {}
    verts, faces = [], []
    n = 0
    for c in range(1, len(s)):
        v, f = parts[c]
        starts[c] = n
        verts.append(v)
        faces.append(f + n)
        n += len(v)
    mirror = np.empty(n, dtype=np.int64)
    for c in range(1, len(s)):
        m = int(s.rho[c])
        size = len(parts[c][0])
        if m == c:
            mirror[starts[c]:starts[c] + size] = starts[c] + vmirror_local[c]
        else:
            mirror[starts[c]:starts[c] + size] = starts[m] + np.arange(size)
    return Mesh(np.vstack(verts), np.vstack(faces)), mirror


def _cylinder_mesh(s, params):
    """Single open tube along the chain, ``n_rings`` rings over its length."""
    g = s.g
    a, b = g[0], g[-1]
    v, f = _tube(a, b, params.cylinder_radius, params.ring_resolution, params.n_rings, 0.0,
                 center_plane=False, caps=False)
    return Mesh(v, f)


# ---------------------------------------------------------------------------
# Ground-truth weights
# ---------------------------------------------------------------------------


def smoothstep(edge0, edge1, x):
    t = np.clip((np.asarray(x, dtype=np.float64) - edge0) / (edge1 - edge0), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def falloff_weights(vertices, s, width):
    """Smoothstep blend between the two nearest bones (see module docstring)."""
    v = np.ascontiguousarray(vertices, dtype=np.float64)
    bones = s.bones()
    owner = s.parents[1:]
    nb = bones.shape[0]
    w = np.zeros((v.shape[0], len(s)))
    if nb == 0:
        w[:, 0] = 1.0
        return w
    d = np.empty((v.shape[0], nb))
    for k in range(nb):
        d[:, k] = np.sqrt(_kernels.point_segments_min_sq(
            v, np.ascontiguousarray(bones[k:k + 1, 0]), np.ascontiguousarray(bones[k:k + 1, 1])))
    if nb == 1:
        w[:, owner[0]] = 1.0
        return w
    order = np.argsort(d, axis=1, kind="stable")
    ia, ib = order[:, 0], order[:, 1]
    rows = np.arange(v.shape[0])
    gap = d[rows, ib] - d[rows, ia]
    wb = 0.5 * (1.0 - smoothstep(0.0, width, gap))
    np.add.at(w, (rows, owner[ia]), 1.0 - wb)
    np.add.at(w, (rows, owner[ib]), wb)
    return w / w.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Characters
# ---------------------------------------------------------------------------


def make_character(template="biped_simple", seed=0, params=None):
    """Build a synthetic character.

    Parameters
    ----------
    template : {"biped_simple", "biped_branchy", "two_bone_cylinder"}
    seed : int
        Drives bone-length jitter and the bundled clips.
    params : CharacterParams or dict, optional

    Returns
    -------
    SyntheticCharacter
    """
    if params is None:
        params = CharacterParams()
    elif isinstance(params, dict):
        try:
            params = CharacterParams(**params)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None
    params.validate(template)
    rng = np.random.default_rng(seed)

    if template == "two_bone_cylinder":
        L = params.bone_length
        s = Skeleton(["Bone0", "Bone1", "Bone1_end"], [-1, 0, 1],
                     [[0.0, 0.0, 0.0], [0.0, L, 0.0], [0.0, L, 0.0]], [0, 1, 2])
        mesh = _cylinder_mesh(s, params)
        mirror = None
        width = params.falloff_width or 0.3 * L
        kinds = ("random_smooth",)
    else:
        center, left = ((_BIPED_CENTER, _BIPED_LEFT) if template == "biped_simple"
                        else (_BRANCHY_CENTER, _BRANCHY_LEFT))
        names, parents, pos, radius, rho = _biped_table(center, left)
        s = _jittered(names, parents, pos, rho, params.proportion_jitter, rng)
        mesh, mirror = _tube_mesh(s, radius, params)
        width = params.falloff_width or 0.05
        kinds = CLIP_KINDS
    w = falloff_weights(mesh.vertices, s, width)
    clips = [make_clip(s, kind, params.clip_frames, seed + 1 + i)
             for i, kind in enumerate(kinds)]
    return SyntheticCharacter(s, mesh, w, clips, mirror, template, params.frame_time, params)


# ---------------------------------------------------------------------------
# Clips
# ---------------------------------------------------------------------------


def _smooth_signal(rng, frames, n_terms=3, base=0.15):
    """Zero at frame 0, bounded by 1 in magnitude: normalized sum of sinusoids."""
    t = np.arange(frames, dtype=np.float64)
    amp = rng.uniform(0.3, 1.0, n_terms)
    omega = base * rng.uniform(0.5, 1.5, n_terms) * (1 + np.arange(n_terms))
    phase = rng.uniform(0.0, 2.0 * np.pi, n_terms)
    sig = (amp[:, None] * (np.sin(omega[:, None] * t + phase[:, None])
                           - np.sin(phase[:, None]))).sum(axis=0)
    return sig / (2.0 * amp.sum())


def _active(s, patterns):
    out = [k for k in range(len(s)) if not s.is_leaf(k) and k != 0
           and any(p in s.names[k].lower() for p in patterns)]
    return out or [k for k in range(1, len(s)) if not s.is_leaf(k)]


def make_clip(s, kind="random_smooth", frames=24, seed=0, max_angle=None):
    """Smooth joint-limited motion starting from the rest pose.

    Every joint's rotation is an axis-angle vector whose components are
    bounded sinusoid sums, scaled so the rotation angle never exceeds
    ``max_angle`` radians. Leaf joints never rotate.

    Parameters
    ----------
    s : Skeleton
    kind : {"wave", "crouch", "random_smooth"}
    frames : int
    seed : int
    max_angle : float, optional
        Defaults to 0.6 (random_smooth), 0.9 (wave) or 0.7 (crouch).

    Returns
    -------
    PoseTransforms
        With a leading frame dimension of size ``frames``.
    """
    if kind not in CLIP_KINDS:
        raise InvalidConfig(f"unknown clip kind {kind!r}; expected one of {CLIP_KINDS}")
    if int(frames) != frames or frames < 1:
        raise InvalidConfig("frames must be a positive integer")
    frames = int(frames)
    if max_angle is None:
        max_angle = {"random_smooth": 0.6, "wave": 0.9, "crouch": 0.7}[kind]
    if not max_angle >= 0:
        raise InvalidConfig("max_angle must be non-negative")
    rng = np.random.default_rng(seed)
    j = len(s)
    rot = np.broadcast_to(np.eye(3), (frames, j, 3, 3)).copy()
    trans = np.zeros((frames, 3))
    bound = max_angle / np.sqrt(3.0)

    def animate(joints, scale=1.0):
        for k in joints:
            vec = np.stack([_smooth_signal(rng, frames) for _ in range(3)], axis=1)
            vec *= bound * scale
            for f in range(1, frames):
                ang = np.linalg.norm(vec[f])
                if ang > 0:
                    rot[f, k] = axis_angle_matrix(vec[f], ang)

    if kind == "random_smooth":
        animate([k for k in range(j) if not s.is_leaf(k)])
        h = s.height() or 1.0
        for c in (0, 2):
            trans[:, c] = 0.3 * h * _smooth_signal(rng, frames)
    elif kind == "wave":
        animate(_active(s, ("arm", "shoulder", "hand")))
        animate(_active(s, ("spine", "neck", "head")), 0.3)
    else:
        t = np.arange(frames, dtype=np.float64)
        phase = 0.5 * (1.0 - np.cos(2.0 * np.pi * t / max(frames, 2)))
        theta = max_angle * phase
        for k in range(1, j):
            low = s.names[k].lower()
            if s.is_leaf(k):
                continue
            if "upleg" in low or "thigh" in low:
                a = -theta
            elif "leg" in low or "knee" in low or "shin" in low:
                a = 2.0 * theta
            elif "foot" in low or "ankle" in low:
                a = -theta
            else:
                continue
            for f in range(1, frames):
                rot[f, k] = euler_to_matrix([a[f], 0.0, 0.0], "XYZ", degrees=False)
        pose = forward_kinematics(s, rot, trans, check=False)
        toes = toe_joints(s) or list(range(j))
        trans[:, 1] = -(pose.positions[:, toes, 1].min(axis=1) - s.g[toes, 1].min())
    rot[0] = np.eye(3)
    trans[0] = 0.0
    return forward_kinematics(s, rot, trans, check=False)


def deformed_frames(character, clip=None, weights=None):
    """Deform the character mesh over a clip (default: its first clip)."""
    from .animation import deform_clip

    clip = character.gt_clips[0] if clip is None else clip
    w = character.gt_weights if weights is None else weights
    return deform_clip(character.mesh, w, character.skeleton, clip)


__all__ = [
    "CLIP_KINDS", "CharacterParams", "SyntheticCharacter", "TEMPLATES", "deformed_frames",
    "falloff_weights", "make_character", "make_clip", "smoothstep",
]
