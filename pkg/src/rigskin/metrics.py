"""
Rigging, skinning and deformation quality metrics.

Chamfer-family rigging metrics are in squared length units and are also
reported multiplied by 1000, the scale used in published comparison
tables. Deformation errors are in length units.
"""

import json
import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import _kernels
from .errors import EmptySet, IndexOutOfRange, ShapeMismatch
from .solvers.losses import chamfer

B2B_SAMPLES = 64


def _pts(x):
    return np.ascontiguousarray(np.asarray(getattr(x, "vertices", x), dtype=np.float64)
                                .reshape(-1, 3))


def _bones(b):
    if hasattr(b, "bones"):
        b = b.bones()
    return np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 2, 3))


def cd_j2j(g_a, g_b):
    """Chamfer distance between two joint position sets."""
    return chamfer(_pts(getattr(g_a, "g", g_a)), _pts(getattr(g_b, "g", g_b)))


def _mean_sq_to_segments(points, bones):
    if points.shape[0] == 0 or bones.shape[0] == 0:
        raise EmptySet("joint-to-bone distance needs joints and bones")
    d = _kernels.point_segments_min_sq(points, np.ascontiguousarray(bones[:, 0]),
                                       np.ascontiguousarray(bones[:, 1]))
    return math.fsum(d) / points.shape[0]


def cd_j2b(joints_a, bones_a, joints_b, bones_b):
    """Symmetric joint-to-bone Chamfer distance.

    Mean squared distance from each joint of ``a`` to the nearest bone
    segment of ``b``, plus the same from ``b``'s joints to ``a``'s bones.
    """
    ja, jb = _pts(joints_a), _pts(joints_b)
    ba, bb = _bones(bones_a), _bones(bones_b)
    return _mean_sq_to_segments(ja, bb) + _mean_sq_to_segments(jb, ba)


def sample_bones(bones, n=B2B_SAMPLES):
    """``n`` evenly spaced points per bone, endpoints included."""
    b = _bones(bones)
    t = np.linspace(0.0, 1.0, n)[None, :, None]
    return (b[:, :1] + t * (b[:, 1:] - b[:, :1])).reshape(-1, 3)


def quadrature_weights(n):
    """Integer composite Simpson weights for ``n`` evenly spaced samples.

    An odd interval count is closed with a Simpson 3/8 panel; two samples
    fall back to the trapezoid rule. Weights are scaled by 24 so they are
    exact integers.
    """
    if n < 2:
        raise ValueError("at least two samples per bone are required")
    m = n - 1
    c = np.zeros(n)
    if m == 1:
        c[:] = 12.0
        return c
    simp = m if m % 2 == 0 else m - 3
    for i in range(0, simp, 2):
        c[i:i + 3] += (8.0, 32.0, 8.0)
    if simp < m:
        c[simp:] += (9.0, 27.0, 27.0, 9.0)
    return c


def _shared_bones(bones, other):
    """Mask of bones that also occur in ``other`` (either orientation)."""
    keys = {tuple(b.reshape(-1)) for b in other} | {tuple(b[::-1].reshape(-1)) for b in other}
    return np.array([tuple(b.reshape(-1)) in keys for b in bones], dtype=bool)


def _mean_sq_along_bones(bones, other, n):
    d = _kernels.point_segments_min_sq(sample_bones(bones, n),
                                       np.ascontiguousarray(other[:, 0]),
                                       np.ascontiguousarray(other[:, 1])).reshape(-1, n)
    # samples lie on a shared bone exactly, rounding of the sample positions aside
    d[_shared_bones(bones, other)] = 0.0
    c = quadrature_weights(n)
    return math.fsum((d * c).reshape(-1)) / (math.fsum(c) * bones.shape[0])


def cd_b2b(bones_a, bones_b, n=B2B_SAMPLES):
    """Bone-to-bone Chamfer distance.

    ``n`` evenly spaced points per bone (endpoints included) are measured
    against the other set's continuous bone segments, in both directions.
    Along each bone the squared distances are combined with composite
    Simpson weights, so the result approximates the mean over the bone's
    length rather than over its samples; every bone counts equally.
    """
    ba, bb = _bones(bones_a), _bones(bones_b)
    if ba.shape[0] == 0 or bb.shape[0] == 0:
        raise EmptySet("bone-to-bone distance needs two non-empty bone sets")
    return _mean_sq_along_bones(ba, bb, n) + _mean_sq_along_bones(bb, ba, n)


def skinning_l1(w_pred, w_gt):
    """Mean over vertices of the L1 distance between weight rows."""
    a = np.asarray(getattr(w_pred, "weights", w_pred), dtype=np.float64)
    b = np.asarray(getattr(w_gt, "weights", w_gt), dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"weights {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b).sum(axis=1)))


def _frames(x):
    a = np.asarray(getattr(x, "vertices", x), dtype=np.float64)
    return a[None] if a.ndim == 2 else a


def deformation_cd(pred, gt):
    """Chamfer distance between deformed vertex sets, in length units.

    Averages unsquared nearest-neighbour distances in each direction and
    takes the mean of the two. Vertex counts may differ. Frame stacks
    (F, N, 3) are averaged over frames.
    """
    p, g = _frames(pred), _frames(gt)
    if p.shape[0] != g.shape[0]:
        raise ShapeMismatch(f"{p.shape[0]} predicted frames vs {g.shape[0]} reference frames")
    cds = []
    for pf, gf in zip(p, g):
        pf, gf = np.ascontiguousarray(pf), np.ascontiguousarray(gf)
        if pf.shape[0] == 0 or gf.shape[0] == 0:
            raise EmptySet("deformation CD needs non-empty vertex sets")
        ab = math.fsum(np.sqrt(_kernels.min_sq_dist(pf, gf))) / pf.shape[0]
        ba = math.fsum(np.sqrt(_kernels.min_sq_dist(gf, pf))) / gf.shape[0]
        cds.append(0.5 * (ab + ba))
    return math.fsum(cds) / len(cds)


def deformation_errors(pred, gt):
    """``(cd, ade, mde)`` between deformed meshes.

    Inputs may be single frames (N, 3) or frame stacks (F, N, 3); errors are
    pooled over frames. ``cd`` is :func:`deformation_cd`. ``ade`` and
    ``mde`` are the mean and max per-vertex Euclidean errors and need equal
    vertex counts.
    """
    p, g = _frames(pred), _frames(gt)
    cd = deformation_cd(p, g)
    if p.shape != g.shape:
        raise ShapeMismatch(f"ADE/MDE need equal vertex counts: {p.shape} vs {g.shape}")
    err = np.linalg.norm(p - g, axis=-1).reshape(-1)
    return cd, math.fsum(err) / err.size, float(err.max())


def els(pred, gt, edges):
    """Edge length score: mean over edges of ``1 - | |e_pred| / |e_gt| - 1 |``.

    Edges with zero reference length are skipped with a warning. Accepts
    single frames or frame stacks (pooled).
    """
    p = np.asarray(getattr(pred, "vertices", pred), dtype=np.float64)
    g = np.asarray(getattr(gt, "vertices", gt), dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    n = p.shape[-2]
    if e.size and (e.min() < 0 or e.max() >= n):
        raise IndexOutOfRange(f"edge index out of range for {n} vertices")
    lp = np.linalg.norm(p[..., e[:, 1], :] - p[..., e[:, 0], :], axis=-1).reshape(-1)
    lg = np.linalg.norm(g[..., e[:, 1], :] - g[..., e[:, 0], :], axis=-1).reshape(-1)
    ok = lg > 0
    if not ok.all():
        warnings.warn(f"skipping {int((~ok).sum())} zero-length reference edge(s)", stacklevel=2)
    if not ok.any():
        raise EmptySet("no edges with positive reference length")
    return math.fsum(1.0 - np.abs(lp[ok] / lg[ok] - 1.0)) / int(ok.sum())


@dataclass(frozen=True)
class MetricReport:
    """All evaluation metrics; ``nan`` marks a metric that was not computed."""

    cd_j2j: float = math.nan
    cd_j2b: float = math.nan
    cd_b2b: float = math.nan
    skinning_l1: float = math.nan
    cd: float = math.nan
    ade: float = math.nan
    mde: float = math.nan
    els: float = math.nan

    SCALED = ("cd_j2j", "cd_j2b", "cd_b2b", "cd", "ade", "mde")

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def as_dict(self):
        out = {}
        for k, v in self.items():
            out[k] = v
            if k in self.SCALED:
                out[k + "_x1e3"] = v * 1000.0
        return out

    def to_kv(self):
        """One ``key = value`` line per metric, raw and x1e3."""
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    def to_json(self):
        d = {k: (None if math.isnan(v) else v) for k, v in self.as_dict().items()}
        return json.dumps(d, indent=2, sort_keys=False) + "\n"

    def to_table(self):
        """Aligned columns: metric, raw value, value x1e3 (where applicable)."""
        rows = [("metric", "raw", "x1e3")]
        for k, v in self.items():
            rows.append((k, _fmt(v), _fmt(v * 1000.0) if k in self.SCALED else ""))
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        return "".join(f"{a:<{w0}}  {b:>{w1}}  {c}".rstrip() + "\n" for a, b, c in rows)


def _fmt(v):
    return "nan" if math.isnan(v) else format(v, ".10g")


def evaluate(pred_skeleton=None, gt_skeleton=None, pred_weights=None, gt_weights=None,
             pred_frames=None, gt_frames=None, edges=None):
    """Build a :class:`MetricReport` from whatever pairs are supplied.

    ``skinning_l1`` is left as nan when the weight matrices differ in shape
    (for example when the predicted skeleton has a different joint count).
    """
    vals = {}
    if pred_skeleton is not None and gt_skeleton is not None:
        vals["cd_j2j"] = cd_j2j(pred_skeleton.g, gt_skeleton.g)
        vals["cd_j2b"] = cd_j2b(pred_skeleton.g, pred_skeleton.bones(),
                                gt_skeleton.g, gt_skeleton.bones())
        vals["cd_b2b"] = cd_b2b(pred_skeleton.bones(), gt_skeleton.bones())
    if pred_weights is not None and gt_weights is not None:
        a = np.asarray(getattr(pred_weights, "weights", pred_weights))
        b = np.asarray(getattr(gt_weights, "weights", gt_weights))
        if a.shape == b.shape:
            vals["skinning_l1"] = skinning_l1(a, b)
    if pred_frames is not None and gt_frames is not None:
        vals["cd"], vals["ade"], vals["mde"] = deformation_errors(pred_frames, gt_frames)
        if edges is not None:
            vals["els"] = els(pred_frames, gt_frames, edges)
    return MetricReport(**vals)


__all__ = [
    "B2B_SAMPLES", "MetricReport", "cd_b2b", "cd_j2b", "cd_j2j", "deformation_cd",
    "deformation_errors", "els", "evaluate", "quadrature_weights", "sample_bones",
    "skinning_l1",
]
