"""Rule-based motion retargeting between skeletons with different configurations.

Joints are matched by exact name, then by the longest shared name token,
then topologically (an unmatched child of a matched joint takes the free
source child whose rest offset points the most similar way). Every match
keeps ancestry: if target ``a`` maps to source ``b``, target ancestors of
``a`` map to source ancestors of ``b``.

Poses are transferred by local rotation. A matched target joint receives
the product of the source local rotations along the source chain from just
below its nearest matched ancestor's image down to its own image, which is
a plain copy when no source joints were skipped. Unmatched target joints
get the identity.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import NoRoot, SizeMismatch
from .skeleton import PoseTransforms, forward_kinematics, ground_height

_MIN_TOKEN = 3
_SIDE_TOKENS = {"left", "right", "l", "r"}


@dataclass(frozen=True, eq=False)
class JointCorrespondence:
    """``map[j]`` is the source joint matched to target joint ``j``, or -1."""

    map: np.ndarray

    def __post_init__(self):
        m = np.array(self.map, dtype=np.int64)
        m.setflags(write=False)
        object.__setattr__(self, "map", m)

    def source_of(self, j):
        k = int(self.map[j])
        return None if k < 0 else k

    @property
    def mapped(self):
        return self.map >= 0

    def named(self, src, tgt):
        """``{target name: source name or None}``."""
        return {tgt.names[j]: (None if k < 0 else src.names[k]) for j, k in enumerate(self.map)}


def name_tokens(name):
    """Lower-case tokens of a joint name (camel case, separators and digits split)."""
    name = name.split(":")[-1]
    parts = re.findall(r"[A-Z]+(?=[A-Z][a-z]|\b|[^A-Za-z])|[A-Z]?[a-z]+|[A-Z]+|\d+", name)
    return {p.lower() for p in parts}


def _side(tokens):
    if tokens & {"left", "l"}:
        return "l"
    if tokens & {"right", "r"}:
        return "r"
    return None


def _ancestors(s, j):
    out = []
    p = s.parents[j]
    while p >= 0:
        out.append(int(p))
        p = s.parents[p]
    return out


def _consistent(src, tgt, m, a, b):
    """Would mapping target ``a`` to source ``b`` keep ancestry with ``m``?"""
    if b in m:
        return False
    tanc = set(_ancestors(tgt, a))
    sanc = set(_ancestors(src, b))
    for a2, b2 in enumerate(m):
        if b2 < 0:
            continue
        if a2 in tanc and b2 not in sanc:
            return False
        if a in _ancestors(tgt, a2) and b not in _ancestors(src, b2):
            return False
    return True


def build_correspondence(src, tgt):
    """Match target joints to source joints; deterministic.

    Parameters
    ----------
    src, tgt : Skeleton

    Returns
    -------
    JointCorrespondence
    """
    for s in (src, tgt):
        if len(s) == 0 or s.parents[0] >= 0:
            raise NoRoot("skeleton has no root joint")
    m = [-1] * len(tgt)
    m[0] = 0

    src_index = {n: k for k, n in enumerate(src.names)}
    for a in range(1, len(tgt)):
        b = src_index.get(tgt.names[a])
        if b is not None and _consistent(src, tgt, m, a, b):
            m[a] = b

    stoks = [name_tokens(n) for n in src.names]
    for a in range(1, len(tgt)):
        if m[a] >= 0:
            continue
        ta = name_tokens(tgt.names[a])
        side = _side(ta)
        best = None
        for b in range(len(src)):
            if _side(stoks[b]) != side:
                continue
            shared = [t for t in ta & stoks[b] if t not in _SIDE_TOKENS and len(t) >= _MIN_TOKEN]
            if not shared:
                continue
            score = (-max(len(t) for t in shared), -len(shared), b)
            if (best is None or score < best[0]) and _consistent(src, tgt, m, a, b):
                best = (score, b)
        if best is not None:
            m[a] = best[1]

    for a in range(1, len(tgt)):
        if m[a] >= 0:
            continue
        pb = m[tgt.parents[a]]
        if pb < 0:
            continue
        da = tgt.offsets[a]
        best = None
        for b in src.children(pb):
            if not _consistent(src, tgt, m, a, b):
                continue
            db = src.offsets[b]
            na, nb = np.linalg.norm(da), np.linalg.norm(db)
            cos = float(da @ db / (na * nb)) if na > 0 and nb > 0 else 0.0
            score = (-cos, b)
            if best is None or score < best[0]:
                best = (score, b)
        if best is not None:
            m[a] = best[1]
    return JointCorrespondence(m)


def root_height(s):
    """Root height above the skeleton's own ground level, rest pose."""
    h = float(s.g[0, 1] - ground_height(s))
    return h if h > 0 else s.height()


def height_ratio(src, tgt):
    hs, ht = root_height(src), root_height(tgt)
    return ht / hs if hs > 0 else 1.0


def _chains(src, tgt, corr):
    """Source joints whose local rotations compose into each target joint."""
    m = corr.map
    out = []
    for a in range(len(tgt)):
        b = int(m[a])
        if b < 0:
            out.append(())
            continue
        p = tgt.parents[a]
        while p >= 0 and m[p] < 0:
            p = tgt.parents[p]
        stop = -1 if p < 0 else int(m[p])
        chain = []
        k = b
        while k >= 0 and k != stop:
            chain.append(k)
            k = int(src.parents[k])
        out.append(tuple(reversed(chain)))
    return out


def retarget_pose(src_pose, corr, tgt, src):
    """Transfer a (possibly multi-frame) pose from ``src`` onto ``tgt``.

    The root's world position is scaled about the ground by the ratio of
    grounded rest root heights, so feet that touch the ground in the source
    touch it in the target.
    """
    rot = np.asarray(src_pose.local_rotation)
    if rot.shape[-3] != len(src):
        raise SizeMismatch(f"pose has {rot.shape[-3]} joints, source skeleton has {len(src)}")
    if corr.map.shape[0] != len(tgt):
        raise SizeMismatch("correspondence was built for a different target skeleton")
    batch = rot.shape[:-3]
    out = np.broadcast_to(np.eye(3), batch + (len(tgt), 3, 3)).copy()
    for a, chain in enumerate(_chains(src, tgt, corr)):
        for k in chain:
            out[..., a, :, :] = out[..., a, :, :] @ rot[..., k, :, :]

    ratio = height_ratio(src, tgt)
    y_src, y_tgt = ground_height(src), ground_height(tgt)
    src_root = np.asarray(src_pose.root_translation) + src.offsets[0]
    tgt_root = np.array(src_root, dtype=np.float64)
    tgt_root[..., 1] -= y_src
    tgt_root *= ratio
    tgt_root[..., 1] += y_tgt
    return forward_kinematics(tgt, out, tgt_root - tgt.offsets[0], check=False)


def retarget_clip(src_pose, src, tgt, corr=None):
    """Convenience wrapper that builds the correspondence when missing."""
    corr = corr or build_correspondence(src, tgt)
    return retarget_pose(src_pose, corr, tgt, src)


__all__ = [
    "JointCorrespondence", "PoseTransforms", "build_correspondence", "height_ratio",
    "name_tokens", "retarget_clip", "retarget_pose", "root_height",
]
