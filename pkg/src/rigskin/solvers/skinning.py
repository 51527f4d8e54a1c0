"""Self-supervised skinning-weight estimation.

Weights are a row softmax of a free logit matrix, ``A = softmax(Z / sqrt(n_d))``.
Given posed skeletons and the matching deformed meshes, the logits are fit by
minimizing the mean over samples of

    lambda_vtx * L_vtx + lambda_edge * L_edge

where the prediction is linear blend skinning with weights ``A``. Because the
prediction is linear in each weight row, both losses are quadratic in ``A``.
The per-vertex Gram matrices and per-edge cross terms are accumulated once,
so an iteration costs ``O((N_V + |E|) J^2)`` no matter how many samples there
are.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..animation import apply_lbs
from ..errors import NonFinite, ShapeMismatch, SizeMismatch, Unidentifiable
from ..skeleton import forward_kinematics, skinning_transforms
from .losses import loss_edge, loss_vtx


def softmax_rows(logits, n_d=32):
    """Row softmax of ``logits / sqrt(n_d)`` using the max-shift trick."""
    z = np.asarray(logits, dtype=np.float64) / np.sqrt(n_d)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SkinningWeights:
    """Logit matrix and the row-stochastic weights it defines.

    Attributes
    ----------
    logits : ndarray, shape (N_V, N_J)
    n_d : int
        Softmax scale; logits are divided by ``sqrt(n_d)``.
    loss_trace : tuple of float
        Objective per accepted iteration when produced by a solver.
    weights : ndarray, shape (N_V, N_J)
    """

    logits: np.ndarray
    n_d: int = 32
    loss_trace: tuple = ()
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        z = np.array(self.logits, dtype=np.float64)
        if z.ndim != 2:
            raise ShapeMismatch(f"logits must be 2-D, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise NonFinite("logits must be finite")
        if self.n_d <= 0:
            raise ValueError("n_d must be positive")
        w = softmax_rows(z, self.n_d)
        z.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "logits", z)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "loss_trace", tuple(float(v) for v in self.loss_trace))

    @classmethod
    def from_weights(cls, weights, n_d=32, floor=1e-12):
        """Logits reproducing ``weights`` (zeros are clamped to ``floor``)."""
        w = np.maximum(np.asarray(weights, dtype=np.float64), floor)
        return cls(np.sqrt(n_d) * np.log(w / w.sum(axis=1, keepdims=True)), n_d)


@dataclass(frozen=True, eq=False)
class TrainingSample:
    """A rest mesh, its deformed positions and the pose that produced them."""

    mesh: object
    gt_deformed: np.ndarray
    pose: object

    def __post_init__(self):
        v = np.array(getattr(self.gt_deformed, "vertices", self.gt_deformed), dtype=np.float64)
        if v.shape != self.mesh.vertices.shape:
            raise ShapeMismatch(
                f"deformed mesh has shape {v.shape}, rest mesh {self.mesh.vertices.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "gt_deformed", v)


@dataclass(frozen=True)
class SkinningConfig:
    n_d: int = 32
    lambda_vtx: float = 1.0
    lambda_edge: float = 1.0
    max_iter: int = 2000
    rel_tol: float = 1e-8
    max_backoffs: int = 20
    step: float = 1.0
    init_noise: float = 1e-3
    beta: float = None          # default 4 / mean bone length
    tie_tol: float = 1e-12
    seed: int = 0


# Logit given to joints whose transforms duplicate a lower-index joint, in
# units of sqrt(n_d): their weight is exp(-40) relative to an O(1) entry.
_FROZEN = -40.0


def _pose_transforms(samples, s):
    rest = forward_kinematics(s)
    ts = []
    for k, smp in enumerate(samples):
        gt = smp.pose.global_transforms
        if gt.shape != (len(s), 4, 4):
            raise SizeMismatch(f"sample {k}: pose has shape {gt.shape}, skeleton has {len(s)} joints")
        ts.append(skinning_transforms(rest, smp.pose))
    return np.stack(ts)


def tied_joints(transforms, tol=1e-12):
    """Representative per joint: the lowest index with identical transforms.

    Joints whose skinning transforms agree in every sample cannot be told
    apart by any reconstruction loss, so only the representative is free.
    """
    t = np.asarray(transforms)
    j = t.shape[1]
    rep = np.arange(j)
    scale = 1.0 + np.abs(t).max()
    for a in range(j):
        if rep[a] != a:
            continue
        for b in range(a + 1, j):
            if rep[b] == b and np.max(np.abs(t[:, a] - t[:, b])) <= tol * scale:
                rep[b] = a
    return rep


def initial_logits(mesh, s, beta=None, noise=1e-3, seed=0):
    """Distance-to-bone prior: ``-beta * dist(vertex, bones owned by joint)``.

    A joint owns the segments to each of its children; a leaf owns its own
    position. A seeded perturbation of size ``noise`` breaks ties.
    """
    v = np.ascontiguousarray(mesh.vertices)
    g = s.g
    lengths = np.linalg.norm(s.offsets[1:], axis=1)
    lengths = lengths[lengths > 0]
    if beta is None:
        beta = 4.0 / lengths.mean() if lengths.size else 1.0
    d = np.empty((v.shape[0], len(s)))
    for j in range(len(s)):
        kids = list(s.children(j))
        if kids:
            a = np.repeat(g[j][None], len(kids), axis=0)
            b = g[kids]
        else:
            a = g[j][None]
            b = a
        d[:, j] = np.sqrt(_kernels.point_segments_min_sq(v, np.ascontiguousarray(a),
                                                         np.ascontiguousarray(b)))
    rng = np.random.default_rng(seed)
    return -beta * d + noise * rng.standard_normal(d.shape)


class SkinningObjective:
    """Quadratic-form evaluation of the skinning objective.

    Parameters
    ----------
    samples : list of TrainingSample
    s : Skeleton
    cfg : SkinningConfig
    """

    def __init__(self, samples, s, cfg=None):
        cfg = cfg or SkinningConfig()
        if not samples:
            raise ValueError("at least one training sample is required")
        mesh = samples[0].mesh
        for smp in samples[1:]:
            if smp.mesh.vertices.shape != mesh.vertices.shape:
                raise ShapeMismatch("all samples must share the rest mesh")
        self.cfg = cfg
        self.mesh = mesh
        self.tau = float(np.sqrt(cfg.n_d))
        n = mesh.n_vertices
        j = len(s)
        edges = np.ascontiguousarray(mesh.edges, dtype=np.int64)
        self.transforms = _pose_transforms(samples, s)
        n_s = len(samples)

        vh = np.concatenate([mesh.vertices, np.ones((n, 1))], axis=1)
        h = np.zeros((n, j, j))
        bvec = np.zeros((n, j))
        k = np.zeros((edges.shape[0], j, j))
        fa = np.zeros((edges.shape[0], j))
        fb = np.zeros((edges.shape[0], j))
        const_v = 0.0
        const_e = 0.0
        ia, ib = edges[:, 0], edges[:, 1]
        for t, smp in zip(self.transforms, samples):
            u = np.einsum("jab,nb->nja", t[:, :3, :], vh)   # (N, J, 3)
            v = smp.gt_deformed
            h += np.einsum("nja,nka->njk", u, u)
            bvec += np.einsum("nja,na->nj", u, v)
            const_v += float(np.sum(v * v))
            if edges.shape[0]:
                # d = V_a - V_b so the cross terms carry the kernel's signs
                d = v[ia] - v[ib]
                k += np.einsum("eja,eka->ejk", u[ia], u[ib])
                fa += np.einsum("eja,ea->ej", u[ia], d)
                fb += np.einsum("eja,ea->ej", u[ib], d)
                const_e += float(np.sum(d * d))

        cv = cfg.lambda_vtx / (n_s * n)
        ce = cfg.lambda_edge / (n_s * edges.shape[0]) if edges.shape[0] else 0.0
        deg = np.bincount(edges.reshape(-1), minlength=n).astype(np.float64)
        self.h = h
        self.hcoef = cv + ce * deg
        self.bv = cv * bvec
        self.edges = edges
        self.k = k
        self.fa = fa
        self.fb = fb
        self.ecoef = ce
        self.const = cv * const_v + ce * const_e

        self.rep = tied_joints(self.transforms, cfg.tie_tol)
        self.free = self.rep == np.arange(j)

    def value_and_grad_weights(self, a):
        val, grad = _kernels.skin_quadratic(np.ascontiguousarray(a), self.h, self.hcoef, self.bv,
                                            self.edges, self.k, self.fa, self.fb, self.ecoef)
        return val + self.const, grad

    def value_and_grad(self, logits):
        """Objective and its gradient with respect to the logit matrix."""
        a = softmax_rows(logits, self.cfg.n_d)
        val, ga = self.value_and_grad_weights(a)
        # softmax backward: dZ = A * (G - sum_j A G) / tau
        gz = a * (ga - np.sum(a * ga, axis=1, keepdims=True)) / self.tau
        gz[:, ~self.free] = 0.0
        return val, gz

    def value(self, logits):
        return self.value_and_grad(logits)[0]


def skinning_objective_direct(weights, samples, s, cfg=None):
    """Objective evaluated by deforming every sample (no quadratic forms)."""
    cfg = cfg or SkinningConfig()
    rest = forward_kinematics(s)
    w = np.asarray(getattr(weights, "weights", weights))
    total = 0.0
    for smp in samples:
        pred = apply_lbs(smp.mesh, w, skinning_transforms(rest, smp.pose))
        total += cfg.lambda_vtx * loss_vtx(pred, smp.gt_deformed)
        total += cfg.lambda_edge * loss_edge(pred, smp.gt_deformed, smp.mesh.edges)
    return total / len(samples)


def _is_rest(transforms, tol):
    return np.max(np.abs(transforms - np.eye(4))) <= tol


def solve_skinning(samples, s, cfg=None):
    """Fit skinning weights to posed training samples.

    Full-batch gradient descent on the logits with a backtracking step:
    the step halves on any increase (at most ``max_backoffs`` times) and
    doubles after each accepted move. Iteration stops at ``max_iter`` or when
    the relative decrease falls below ``rel_tol``.

    Parameters
    ----------
    samples : list of TrainingSample
    s : Skeleton
    cfg : SkinningConfig, optional

    Returns
    -------
    SkinningWeights
        With ``loss_trace`` holding the objective after every accepted step.

    Raises
    ------
    NonFinite
        If the objective or gradient stops being finite.

    Warns
    -----
    Unidentifiable
        When every sample is the rest pose; the distance prior is returned.
    """
    cfg = cfg or SkinningConfig()
    obj = SkinningObjective(samples, s, cfg)
    logits = initial_logits(obj.mesh, s, cfg.beta, cfg.init_noise, cfg.seed)
    logits[:, ~obj.free] = _FROZEN * obj.tau

    val, grad = obj.value_and_grad(logits)
    if not (np.isfinite(val) and np.all(np.isfinite(grad))):
        raise NonFinite("skinning objective is not finite at the initial logits")
    if _is_rest(obj.transforms, 1e-12 * (1.0 + np.abs(obj.transforms).max())):
        warnings.warn("every training pose is the rest pose; weights are unidentifiable "
                      "and the distance prior is returned", Unidentifiable, stacklevel=2)
        return SkinningWeights(logits, cfg.n_d, (val,))

    trace = [val]
    step = cfg.step
    for _ in range(cfg.max_iter):
        accepted = False
        finite = True
        for _ in range(cfg.max_backoffs + 1):
            trial = logits - step * grad
            tval, tgrad = obj.value_and_grad(trial)
            finite = np.isfinite(tval) and np.all(np.isfinite(tgrad))
            if finite and tval <= val:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not finite:
                raise NonFinite("skinning objective diverged; reduce the initial step")
            break
        rel = (val - tval) / max(abs(val), 1e-300)
        logits, val, grad = trial, tval, tgrad
        trace.append(val)
        step *= 2.0
        if rel < cfg.rel_tol:
            break
    return SkinningWeights(logits, cfg.n_d, trace)


__all__ = [
    "SkinningConfig", "SkinningObjective", "SkinningWeights", "TrainingSample",
    "initial_logits", "skinning_objective_direct", "softmax_rows", "solve_skinning",
    "tied_joints",
]
