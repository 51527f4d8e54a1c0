"""Fit per-joint offset residuals so a source skeleton aligns with a mesh.

The target skeleton keeps the source hierarchy and has offsets
``o_tgt = o_src + delta_o``. Its rest joint positions are minimized against

    lambda_skel * chamfer(g_gt, g_tgt) + lambda_sdf * mean(max(0, sdf(g_tgt) + margin))

The chamfer term is dropped when no reference joints are given. Residuals
are mirrored after every step so paired joints stay symmetric, and the
result is grounded on its toe joints.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMesh, NonFinite, SizeMismatch
from ..mesh import mesh_bounds
from ..skeleton import ground_height
from .losses import chamfer, chamfer_grad
from .sdf import loss_sdf_hinge, loss_sdf_hinge_grad

MIRROR = np.array([-1.0, 1.0, 1.0])


def symmetrize_residual(delta_o, rho):
    """Average each residual with its mirrored partner.

    ``delta_o[j] <- 0.5 * (delta_o[j] + delta_o[rho[j]] * [-1, 1, 1])``.
    The result is a fixed point: applying it again changes nothing, and
    self-paired joints end up with a zero x component.
    """
    d = np.asarray(delta_o, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.int64)
    if d.ndim != 2 or d.shape[1] != 3 or rho.shape != (d.shape[0],):
        raise SizeMismatch(f"residuals {d.shape} do not match a {rho.shape[0]}-entry map")
    return 0.5 * (d + d[rho] * MIRROR)


def rest_positions(s, offsets):
    """Rest joint positions of ``s``'s hierarchy with replacement offsets."""
    g = np.empty_like(offsets)
    g[0] = offsets[0]
    for k in range(1, len(s)):
        g[k] = g[s.parents[k]] + offsets[k]
    return g


def positions_to_offsets_grad(s, grad_g):
    """Pull a gradient on positions back to offsets (subtree sums)."""
    out = np.array(grad_g, dtype=np.float64)
    for k in range(len(s) - 1, 0, -1):
        out[s.parents[k]] += out[k]
    return out


def _precondition(s, grad_g):
    """Step in joint-position space expressed as an offset update."""
    out = np.array(grad_g, dtype=np.float64)
    out[1:] -= grad_g[s.parents[1:]]
    return out


@dataclass(frozen=True)
class RigConfig:
    lambda_skel: float = 1.0
    lambda_sdf: float = 1.0
    margin_fraction: float = 0.02   # hinge margin as a fraction of skeleton height
    max_iter: int = 500
    rel_tol: float = 1e-12
    max_backoffs: int = 20
    step: float = 0.5
    sdf_step_fraction: float = 1e-4  # finite-difference step over bounds diagonal
    seed: int = 0


@dataclass(frozen=True, eq=False)
class RigSolution:
    delta_o: np.ndarray
    target_skeleton: object
    loss_trace: tuple
    initial_delta_o: np.ndarray = None


class RigObjective:
    """Rig loss as a function of the offset residuals."""

    def __init__(self, mesh, s_src, cfg=None, g_gt=None):
        cfg = cfg or RigConfig()
        if mesh.faces.shape[0] == 0:
            raise EmptyMesh("rig fitting needs a mesh with faces")
        self.mesh = mesh
        self.s = s_src
        self.cfg = cfg
        self.g_gt = None if g_gt is None else np.ascontiguousarray(g_gt, dtype=np.float64)
        ref_height = s_src.height() if g_gt is None else float(np.ptp(self.g_gt[:, 1]))
        if ref_height <= 0:
            lo, hi = mesh_bounds(mesh)
            ref_height = float(hi[1] - lo[1])
        self.margin = cfg.margin_fraction * ref_height
        lo, hi = mesh_bounds(mesh)
        self.fd_step = cfg.sdf_step_fraction * float(np.linalg.norm(hi - lo))

    def positions(self, delta_o):
        return rest_positions(self.s, self.s.offsets + delta_o)

    def value(self, delta_o):
        g = self.positions(delta_o)
        val = 0.0
        if self.g_gt is not None and self.cfg.lambda_skel:
            val += self.cfg.lambda_skel * chamfer(self.g_gt, g)
        if self.cfg.lambda_sdf:
            val += self.cfg.lambda_sdf * loss_sdf_hinge(self.mesh, g, self.margin)
        return val

    def value_and_position_grad(self, delta_o):
        g = self.positions(delta_o)
        val = 0.0
        grad = np.zeros_like(g)
        if self.g_gt is not None and self.cfg.lambda_skel:
            val += self.cfg.lambda_skel * chamfer(self.g_gt, g)
            grad += self.cfg.lambda_skel * chamfer_grad(self.g_gt, g)
        if self.cfg.lambda_sdf:
            v, gs = loss_sdf_hinge_grad(self.mesh, g, self.margin, self.fd_step)
            val += self.cfg.lambda_sdf * v
            grad += self.cfg.lambda_sdf * gs
        return val, grad

    def value_and_grad(self, delta_o):
        """Objective and its gradient with respect to ``delta_o``."""
        val, gg = self.value_and_position_grad(delta_o)
        return val, positions_to_offsets_grad(self.s, gg)


def heuristic_residual(mesh, s_src, g_ref=None):
    """Residual that scales the source to the character and centres it.

    The skeleton is scaled uniformly so its vertical extent matches the
    reference joints' (when given) or else the mesh's, then shifted so its
    vertical and depth centres match. Lateral placement is left to
    symmetry.
    """
    if g_ref is not None:
        ref = np.asarray(g_ref, dtype=np.float64)
        lo, hi = ref.min(axis=0), ref.max(axis=0)
    else:
        lo, hi = mesh_bounds(mesh)
    h_src = s_src.height()
    scale = (hi[1] - lo[1]) / h_src if h_src > 0 else 1.0
    off = s_src.offsets * scale
    g = rest_positions(s_src, off)
    glo, ghi = g.min(axis=0), g.max(axis=0)
    shift = np.zeros(3)
    shift[1] = 0.5 * (lo[1] + hi[1]) - 0.5 * (glo[1] + ghi[1])
    shift[2] = 0.5 * (lo[2] + hi[2]) - 0.5 * (glo[2] + ghi[2])
    off[0] += shift
    return symmetrize_residual(off - s_src.offsets, s_src.rho)


def _grounded(s, delta_o):
    tgt = s.replace(offsets=s.offsets + delta_o)
    h = ground_height(tgt)
    d = np.array(delta_o)
    d[0, 1] -= h
    return d, s.replace(offsets=s.offsets + d)


def solve_rig(mesh, s_src, cfg=None, g_gt=None):
    """Fit offset residuals aligning ``s_src`` with ``mesh``.

    Starts from :func:`heuristic_residual` and runs gradient descent whose
    step is taken in joint-position space (each offset moves by the
    difference between its joint's and its parent's position gradient),
    with a backtracking step length. Residuals are symmetrized after every
    step and the final skeleton is grounded.

    Parameters
    ----------
    mesh : Mesh
    s_src : Skeleton
    cfg : RigConfig, optional
    g_gt : array_like, shape (K, 3), optional
        Reference joint positions; adds the chamfer term.

    Returns
    -------
    RigSolution
    """
    cfg = cfg or RigConfig()
    obj = RigObjective(mesh, s_src, cfg, g_gt)
    d0 = heuristic_residual(mesh, s_src, obj.g_gt)
    d = d0
    val, gg = obj.value_and_position_grad(d)
    if not (np.isfinite(val) and np.all(np.isfinite(gg))):
        raise NonFinite("rig objective is not finite at the initial skeleton")
    trace = [val]
    step = cfg.step
    for _ in range(cfg.max_iter):
        direction = _precondition(s_src, gg)
        accepted = False
        for _ in range(cfg.max_backoffs + 1):
            trial = symmetrize_residual(d - step * direction, s_src.rho)
            tval = obj.value(trial)
            if np.isfinite(tval) and tval <= val:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        rel = (val - tval) / max(abs(val), 1e-300)
        d = trial
        val, gg = obj.value_and_position_grad(d)
        if not np.isfinite(val):
            raise NonFinite("rig objective diverged")
        trace.append(val)
        step *= 2.0
        if val == 0.0 or rel < cfg.rel_tol:
            break
    d, tgt = _grounded(s_src, d)
    return RigSolution(d, tgt, tuple(trace), d0)


__all__ = [
    "MIRROR", "RigConfig", "RigObjective", "RigSolution", "heuristic_residual",
    "positions_to_offsets_grad", "rest_positions", "solve_rig", "symmetrize_residual",
]
