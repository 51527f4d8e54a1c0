"""
Skeleton data model, forward kinematics, grounding, symmetry pairing and
configuration augmentation.

Joints are stored in topological order (every parent index is smaller than
its children's), so a single forward pass evaluates any chain. The rest pose
uses identity local rotations, hence rest global positions are cumulative
sums of local offsets along each chain.
"""

import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core_math import UP, invert_transform, is_rotation
from .errors import InvalidConfig, InvalidRotation, InvalidSkeleton, NoToeJoint, SizeMismatch

TOE_PATTERNS = ("toe", "foot_end", "toebase")
_CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Joint hierarchy with local offsets and a lateral symmetry map.

    Parameters
    ----------
    names : sequence of str
        Unique joint names.
    parents : sequence of int
        Parent index per joint, ``-1`` for the single root.
    offsets : array_like, shape (J, 3)
        Local offset of each joint from its parent (root: from the origin).
    rho : sequence of int, optional
        Symmetric counterpart per joint. Inferred from names when omitted.
    """

    names: tuple
    parents: np.ndarray
    offsets: np.ndarray
    rho: np.ndarray = None
    _children: tuple = field(init=False, repr=False)
    _g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        parents = np.asarray(self.parents, dtype=np.int64).reshape(-1)
        offsets = np.array(self.offsets, dtype=np.float64).reshape(-1, 3)
        j = len(names)
        if j == 0:
            raise InvalidSkeleton("skeleton has no joints")
        if parents.shape[0] != j or offsets.shape[0] != j:
            raise InvalidSkeleton(
                f"{j} names but {parents.shape[0]} parents and {offsets.shape[0]} offsets")
        if len(set(names)) != j:
            raise InvalidSkeleton("joint names must be unique")
        if not np.all(np.isfinite(offsets)):
            raise InvalidSkeleton("non-finite offset")
        if parents[0] != -1 or np.count_nonzero(parents < 0) != 1:
            raise InvalidSkeleton("joint 0 must be the only root (parent -1)")
        for k in range(1, j):
            if not 0 <= parents[k] < k:
                raise InvalidSkeleton(
                    f"joint {k} ({names[k]}) has parent {parents[k]}; parents must precede children")
        parents.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offsets", offsets)

        children = [[] for _ in range(j)]
        for k in range(1, j):
            children[parents[k]].append(k)
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))
        g = np.zeros((j, 3))
        for k in range(j):
            g[k] = offsets[k] if k == 0 else g[parents[k]] + offsets[k]
        g.setflags(write=False)
        object.__setattr__(self, "_g", g)

        if self.rho is None:
            rho = infer_symmetry_map(self)
        else:
            rho = np.asarray(self.rho, dtype=np.int64).reshape(-1)
        if rho.shape[0] != j or np.any(rho < 0) or np.any(rho >= j):
            raise InvalidSkeleton("rho must map every joint to a valid index")
        if not np.array_equal(rho[rho], np.arange(j)):
            raise InvalidSkeleton("rho must be an involution")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    # -- basic queries -----------------------------------------------------

    @property
    def n_joints(self):
        return len(self.names)

    def __len__(self):
        return len(self.names)

    @property
    def g(self):
        """Rest-pose global joint positions, shape (J, 3)."""
        return self._g

    def children(self, j):
        return self._children[j]

    def is_leaf(self, j):
        return len(self._children[j]) == 0

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def depth(self):
        d = np.zeros(len(self), dtype=np.int64)
        for k in range(1, len(self)):
            d[k] = d[self.parents[k]] + 1
        return d

    def bones(self):
        """Bone segments ``(parent, child)`` as an array of shape (K, 2, 3)."""
        idx = np.arange(1, len(self))
        if idx.size == 0:
            return np.zeros((0, 2, 3))
        return np.stack([self.g[self.parents[idx]], self.g[idx]], axis=1)

    def height(self):
        """Vertical extent of the rest pose."""
        return float(self.g[:, 1].max() - self.g[:, 1].min())

    def subtree(self, j):
        out = [j]
        for c in self._children[j]:
            out.extend(self.subtree(c))
        return out

    def is_ancestor(self, a, b):
        """True when ``a`` is a strict ancestor of ``b``."""
        p = self.parents[b]
        while p >= 0:
            if p == a:
                return True
            p = self.parents[p]
        return False

    def replace(self, offsets=None, rho=None, names=None):
        return Skeleton(self.names if names is None else names, self.parents,
                        self.offsets if offsets is None else offsets,
                        self.rho if rho is None else rho)

    def same_as(self, other, tol=0.0):
        return (self.names == other.names and np.array_equal(self.parents, other.parents)
                and np.allclose(self.offsets, other.offsets, rtol=0.0, atol=tol)
                and np.array_equal(self.rho, other.rho))

    @classmethod
    def from_positions(cls, names, parents, positions, rho=None):
        """Build from rest-pose global positions instead of local offsets."""
        positions = np.asarray(positions, dtype=np.float64)
        parents = np.asarray(parents, dtype=np.int64)
        offsets = positions.copy()
        offsets[1:] = positions[1:] - positions[parents[1:]]
        return cls(names, parents, offsets, rho)


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PoseTransforms:
    """Local rotations plus root translation, with derived global transforms.

    Arrays may carry a leading frame dimension: ``local_rotation`` (..., J, 3, 3),
    ``root_translation`` (..., 3), ``global_transforms`` (..., J, 4, 4).
    """

    local_rotation: np.ndarray
    root_translation: np.ndarray
    global_transforms: np.ndarray

    @property
    def positions(self):
        return self.global_transforms[..., :3, 3]

    @property
    def global_rotations(self):
        return self.global_transforms[..., :3, :3]

    def frame(self, t):
        return PoseTransforms(self.local_rotation[t], self.root_translation[t],
                              self.global_transforms[t])

    def __len__(self):
        return self.local_rotation.shape[0]


def forward_kinematics(s, local_rotation=None, root_translation=None, check=True):
    """Compose local rotations down the hierarchy.

    ``global(j) = global(parent(j)) @ Translate(o_j) @ Rotate(R_j)``; the root
    is additionally translated by ``root_translation``. Leading batch
    dimensions (frames) are supported.
    """
    j = len(s)
    if local_rotation is None:
        local_rotation = np.broadcast_to(np.eye(3), (j, 3, 3))
    local_rotation = np.asarray(local_rotation, dtype=np.float64)
    if local_rotation.shape[-3:] != (j, 3, 3):
        raise SizeMismatch(f"expected rotations (..., {j}, 3, 3), got {local_rotation.shape}")
    batch = local_rotation.shape[:-3]
    if root_translation is None:
        root_translation = np.zeros(batch + (3,))
    root_translation = np.broadcast_to(np.asarray(root_translation, dtype=np.float64),
                                       batch + (3,))
    if check and not is_rotation(local_rotation):
        raise InvalidRotation("local rotations must be orthonormal with det +1")

    rot = np.empty(batch + (j, 3, 3))
    pos = np.empty(batch + (j, 3))
    offs = s.offsets
    rot[..., 0, :, :] = local_rotation[..., 0, :, :]
    pos[..., 0, :] = root_translation + offs[0]
    for k in range(1, j):
        p = s.parents[k]
        pr = rot[..., p, :, :]
        pos[..., k, :] = pos[..., p, :] + pr @ offs[k]
        rot[..., k, :, :] = pr @ local_rotation[..., k, :, :]
    glob = np.zeros(batch + (j, 4, 4))
    glob[..., :3, :3] = rot
    glob[..., :3, 3] = pos
    glob[..., 3, 3] = 1.0
    return PoseTransforms(np.array(local_rotation), np.array(root_translation), glob)


def rest_pose(s):
    return forward_kinematics(s)


def skinning_transforms(rest, posed):
    """Per-joint transforms relative to the rest pose: posed @ inverse(rest)."""
    rg = rest.global_transforms
    pg = posed.global_transforms
    if rg.shape[-3:] != pg.shape[-3:]:
        raise SizeMismatch(f"rest has {rg.shape[-3]} joints, posed has {pg.shape[-3]}")
    return pg @ invert_transform(rg)


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------


def toe_joints(s):
    return [k for k, n in enumerate(s.names) if any(t in n.lower() for t in TOE_PATTERNS)]


def ground_height(s):
    """Lowest rest height among toe joints (lowest joint when none match)."""
    toes = toe_joints(s)
    if not toes:
        warnings.warn("no toe joint found by name; grounding on the lowest joint",
                      NoToeJoint, stacklevel=3)
        return float(s.g[:, 1].min())
    return float(s.g[toes, 1].min())


def ground_skeleton(s):
    """Translate along the up-axis so the lowest toe joint has height 0."""
    h = ground_height(s)
    if h == 0.0:
        return s
    offsets = np.array(s.offsets)
    offsets[0] -= h * UP
    return s.replace(offsets=offsets)


# ---------------------------------------------------------------------------
# Symmetry
# ---------------------------------------------------------------------------

_WORD_SWAPS = (("Left", "Right"), ("left", "right"), ("LEFT", "RIGHT"))
_PREFIX_SWAPS = (("L_", "R_"), ("l_", "r_"))
_SUFFIX_SWAPS = ((".L", ".R"), (".l", ".r"), ("_L", "_R"), ("_l", "_r"))


def _swap_word(name):
    for a, b in _WORD_SWAPS:
        if a in name:
            return name.replace(a, b)
        if b in name:
            return name.replace(b, a)
    return None


def _swap_prefix(name):
    # also matches namespaced names such as "rig:L_arm"
    base = name.rsplit(":", 1)
    head = base[0] + ":" if len(base) == 2 else ""
    tail = base[-1]
    for a, b in _PREFIX_SWAPS:
        if tail.startswith(a):
            return head + b + tail[len(a):]
        if tail.startswith(b):
            return head + a + tail[len(b):]
    return None


def _swap_suffix(name):
    for a, b in _SUFFIX_SWAPS:
        if name.endswith(a):
            return name[:-len(a)] + b
        if name.endswith(b):
            return name[:-len(b)] + a
        # suffix before an end-site marker, e.g. "hand.L_end"
        for marker in ("_end", "_End"):
            if name.endswith(a + marker):
                return name[:-len(a + marker)] + b + marker
            if name.endswith(b + marker):
                return name[:-len(b + marker)] + a + marker
    return None


def infer_symmetry_map(s, positions=None):
    """Pair joints with their lateral mirror image.

    Rules are tried in order: Left/Right word swap, ``L_``/``R_`` prefix,
    ``.L``/``_l``-style suffix, then geometric mirroring (nearest joint to the
    x-mirrored position within 1e-3 of the mean bone length). Unpaired joints
    map to themselves, so the result is always an involution.
    """
    names = list(s.names)
    if positions is None:
        positions = s.g if isinstance(s, Skeleton) else None
    j = len(names)
    index = {n: k for k, n in enumerate(names)}
    rho = np.arange(j)
    paired = np.zeros(j, dtype=bool)
    for rule in (_swap_word, _swap_prefix, _swap_suffix):
        for k in range(j):
            if paired[k]:
                continue
            other = rule(names[k])
            if other is None or other not in index:
                continue
            m = index[other]
            if m == k or paired[m] or rule(names[m]) != names[k]:
                continue
            rho[k], rho[m] = m, k
            paired[k] = paired[m] = True
    if positions is not None and j > 1:
        positions = np.asarray(positions, dtype=np.float64)
        parents = np.asarray(s.parents)
        bone = np.linalg.norm(positions[1:] - positions[parents[1:]], axis=1)
        tol = 1e-3 * (bone.mean() if bone.size and bone.mean() > 0 else 1.0)
        mirrored = positions * np.array([-1.0, 1.0, 1.0])
        for k in range(j):
            if paired[k] or abs(positions[k, 0]) <= tol:
                continue
            free = np.flatnonzero(~paired)
            free = free[free != k]
            if free.size == 0:
                continue
            d = np.linalg.norm(positions[free] - mirrored[k], axis=1)
            m = int(free[np.argmin(d)])
            if d.min() <= tol:
                back = np.flatnonzero(~paired)
                back = back[back != m]
                dm = np.linalg.norm(positions[back] - mirrored[m], axis=1)
                # mutual nearest only
                if int(back[np.argmin(dm)]) == k:
                    rho[k], rho[m] = m, k
                    paired[k] = paired[m] = True
    return rho


def _is_left(name):
    low = name.lower()
    return ("left" in low or low.startswith("l_") or ":l_" in low
            or low.endswith((".l", "_l", ".l_end", "_l_end")))


def find_facing_joints(s):
    """Indices ``(left_hip, right_hip, left_shoulder, right_shoulder)``.

    Picks the shallowest symmetric pair whose names look like hips/thighs
    and shoulders/clavicles, falling back to upper arms and then to pairs
    below/above the root. Left is decided by name, else by positive x.
    """
    pairs = []
    for k in range(len(s)):
        m = int(s.rho[k])
        if m > k:
            if _is_left(s.names[k]) != _is_left(s.names[m]):
                left, right = (k, m) if _is_left(s.names[k]) else (m, k)
            else:
                left, right = (k, m) if s.g[k, 0] >= s.g[m, 0] else (m, k)
            pairs.append((left, right))
    if not pairs:
        raise InvalidSkeleton("skeleton has no symmetric joint pairs for a facing frame")
    depth = s.depth()
    root_y = s.g[0, 1]

    def pick(patterns, exclude=(), side=None):
        cands = []
        for left, right in pairs:
            low = s.names[left].lower()
            if patterns is not None:
                if not any(p in low for p in patterns) or any(e in low for e in exclude):
                    continue
            elif side is not None and (s.g[left, 1] - root_y) * side <= 0:
                continue
            cands.append((depth[left], left, right))
        return min(cands)[1:] if cands else None

    hips = (pick(("upleg", "thigh", "hip")) or pick(None, side=-1) or min(
        ((depth[a], a, b) for a, b in pairs))[1:])
    shoulders = (pick(("shoulder", "clavicle")) or pick(("arm",), exclude=("fore", "lower"))
                 or pick(None, side=+1) or hips)
    return hips[0], hips[1], shoulders[0], shoulders[1]


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentConfig:
    """Ranges for :func:`augment_skeleton`; integer ranges are inclusive.

    Insert/remove counts are numbers of operations; each operation acts on a
    symmetric joint pair (two joints) or a single unpaired joint.
    """

    n_insert: tuple = (0, 1)
    n_remove: tuple = (0, 1)
    scale_range: tuple = (0.8, 1.25)
    root_height_range: tuple = (0.9, 1.1)
    min_bone_length: float = 1e-4

    def validate(self):
        for name in ("n_insert", "n_remove"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo or int(lo) != lo or int(hi) != hi:
                raise InvalidConfig(f"{name} must be integers 0 <= lo <= hi, got {(lo, hi)}")
        for name in ("scale_range", "root_height_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi) or not np.isfinite(hi):
                raise InvalidConfig(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if self.min_bone_length < 0:
            raise InvalidConfig("min_bone_length must be non-negative")


def _table(s):
    return {
        "names": list(s.names),
        "parent": [None if p < 0 else s.names[p] for p in s.parents],
        "offset": [np.array(o) for o in s.offsets],
        "mirror": {s.names[k]: s.names[s.rho[k]] for k in range(len(s))},
    }


def _from_table(t):
    names = t["names"]
    kids = {n: [] for n in names}
    roots = []
    for n, p in zip(names, t["parent"]):
        (roots if p is None else kids[p]).append(n)
    if len(roots) != 1:
        raise InvalidSkeleton("augmentation produced a forest")
    order = []
    stack = [roots[0]]
    while stack:
        n = stack.pop()
        order.append(n)
        stack.extend(reversed(kids[n]))
    pos = {n: k for k, n in enumerate(order)}
    off = dict(zip(names, t["offset"]))
    par = dict(zip(names, t["parent"]))
    parents = [-1 if par[n] is None else pos[par[n]] for n in order]
    rho = [pos[t["mirror"][n]] for n in order]
    return Skeleton(order, parents, [off[n] for n in order], rho)


def _unique(name, taken):
    if name not in taken:
        return name
    k = 2
    while f"{name}{k}" in taken:
        k += 1
    return f"{name}{k}"


def _insert(t, child, name):
    k = t["names"].index(child)
    half = t["offset"][k] * 0.5
    parent = t["parent"][k]
    t["names"].insert(k, name)
    t["parent"].insert(k, parent)
    t["offset"].insert(k, half)
    t["parent"][k + 1] = name
    t["offset"][k + 1] = t["offset"][k + 1] - half
    t["mirror"][name] = name


def _remove(t, name):
    k = t["names"].index(name)
    kids = [i for i, p in enumerate(t["parent"]) if p == name]
    if t["parent"][k] is None or len(kids) != 1:
        raise InvalidConfig(f"joint {name!r} is not a removable interior joint")
    c = kids[0]
    t["offset"][c] = t["offset"][c] + t["offset"][k]
    t["parent"][c] = t["parent"][k]
    partner = t["mirror"].pop(name)
    if partner != name and t["mirror"].get(partner) == name:
        t["mirror"][partner] = partner
    del t["names"][k], t["parent"][k], t["offset"][k]


def insert_joint(s, child, name=None):
    """Split the bone ending at joint ``child`` with a new joint at its midpoint."""
    if child <= 0 or child >= len(s):
        raise InvalidConfig("child must be a non-root joint index")
    t = _table(s)
    _insert(t, s.names[child], name or _unique(s.names[child] + "_mid", set(s.names)))
    return _from_table(t)


def remove_joint(s, j):
    """Splice out a non-root joint with exactly one child; the child keeps its position."""
    if j <= 0 or j >= len(s):
        raise InvalidConfig("cannot remove the root")
    t = _table(s)
    _remove(t, s.names[j])
    return _from_table(t)


def scale_skeleton(s, factor):
    return s.replace(offsets=s.offsets * float(factor))


def _removable(s, k):
    low = s.names[k].lower()
    return (k != 0 and len(s.children(k)) == 1 and "hip" not in low)


def augment_skeleton(s, seed, cfg=None):
    """Randomly change the skeleton configuration, deterministically under ``seed``.

    Removes interior joints (splicing their offsets into the child), inserts
    bone midpoints, scales bones per symmetric pair and scales the root
    height. Every operation is mirrored through ``rho`` so a symmetric input
    stays symmetric.
    """
    cfg = cfg or AugmentConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    t = _table(s)

    def orbits(skel, pred):
        seen = set()
        out = []
        for k in range(len(skel)):
            m = int(skel.rho[k])
            if k in seen or not pred(skel, k) or not pred(skel, m):
                continue
            seen.update((k, m))
            out.append(tuple(sorted({k, m})))
        return out

    cur = s
    for _ in range(int(rng.integers(cfg.n_remove[0], cfg.n_remove[1] + 1))):
        cands = orbits(cur, _removable)
        if not cands:
            break
        pick = cands[int(rng.integers(len(cands)))]
        for k in pick:
            _remove(t, cur.names[k])
        cur = _from_table(t)
        t = _table(cur)

    def insertable(skel, k):
        return k != 0 and np.linalg.norm(skel.offsets[k]) >= 2.0 * cfg.min_bone_length

    for _ in range(int(rng.integers(cfg.n_insert[0], cfg.n_insert[1] + 1))):
        cands = orbits(cur, insertable)
        if not cands:
            break
        pick = cands[int(rng.integers(len(cands)))]
        taken = set(t["names"])
        new = []
        for k in pick:
            nm = _unique(cur.names[k] + "_mid", taken)
            taken.add(nm)
            _insert(t, cur.names[k], nm)
            new.append(nm)
        if len(new) == 2:
            t["mirror"][new[0]], t["mirror"][new[1]] = new[1], new[0]
        cur = _from_table(t)
        t = _table(cur)

    offsets = np.array(cur.offsets)
    lo, hi = cfg.scale_range
    for orbit in orbits(cur, lambda skel, k: True):
        f = rng.uniform(lo, hi) if hi > lo else lo
        for k in orbit:
            offsets[k] *= f
    rlo, rhi = cfg.root_height_range
    offsets[0, 1] *= rng.uniform(rlo, rhi) if rhi > rlo else rlo
    lengths = np.linalg.norm(offsets[1:], axis=1)
    if lengths.size and lengths.min() < cfg.min_bone_length:
        raise InvalidConfig("augmentation produced a bone shorter than min_bone_length")
    return cur.replace(offsets=offsets)
