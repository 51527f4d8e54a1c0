"""Reconstruction and skeleton losses with their gradients."""

import math

import numpy as np

from .. import _kernels
from ..errors import EmptySet, IndexOutOfRange, ShapeMismatch


def _points(x, name):
    a = np.ascontiguousarray(getattr(x, "vertices", x), dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ShapeMismatch(f"{name} must have shape (N, 3), got {a.shape}")
    return a


def loss_vtx(pred, gt):
    """Mean squared per-vertex error."""
    p, g = _points(pred, "pred"), _points(gt, "gt")
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    if p.shape[0] == 0:
        return 0.0
    d = p - g
    return float(np.mean(np.einsum("nc,nc->n", d, d)))


def _check_edges(edges, n):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise IndexOutOfRange(f"edge index out of range for {n} vertices")
    return e


def loss_edge(pred, gt, edges):
    """Mean squared difference of edge vectors; invariant to translation."""
    p, g = _points(pred, "pred"), _points(gt, "gt")
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    e = _check_edges(edges, p.shape[0])
    if e.shape[0] == 0:
        return 0.0
    d = (p[e[:, 1]] - p[e[:, 0]]) - (g[e[:, 1]] - g[e[:, 0]])
    return float(np.mean(np.einsum("ec,ec->e", d, d)))


def chamfer(a, b):
    """Sum of the two directional means of squared nearest-neighbour distances.

    Per-point minima come from an exhaustive scan and are summed with
    :func:`math.fsum`, so the value is independent of summation order and
    ``chamfer(a, b) == chamfer(b, a)`` holds exactly.
    """
    a, b = _points(a, "a"), _points(b, "b")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySet("chamfer distance needs two non-empty point sets")
    ab = math.fsum(_kernels.min_sq_dist(a, b)) / a.shape[0]
    ba = math.fsum(_kernels.min_sq_dist(b, a)) / b.shape[0]
    return ab + ba


def chamfer_grad(a, b):
    """Gradient of ``chamfer(a, b)`` with respect to the points of ``b``."""
    a, b = _points(a, "a"), _points(b, "b")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySet("chamfer distance needs two non-empty point sets")
    grad = np.zeros_like(b)
    na = _kernels.argmin_sq_dist(a, b)  # nearest b for each a
    np.add.at(grad, na, 2.0 * (b[na] - a) / a.shape[0])
    nb = _kernels.argmin_sq_dist(b, a)
    grad += 2.0 * (b - a[nb]) / b.shape[0]
    return grad


def loss_skel(g_gt, g_tgt):
    """Chamfer distance between joint sets, which may differ in size."""
    return chamfer(g_gt, g_tgt)


__all__ = ["chamfer", "chamfer_grad", "loss_edge", "loss_skel", "loss_vtx"]
