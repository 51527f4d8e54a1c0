"""Finite-difference helpers for checking analytic gradients."""

import numpy as np


def central_difference(f, x, eps=1e-4, mask=None):
    """Central-difference gradient of scalar ``f`` at ``x``.

    Entries where ``mask`` is False are left at zero.
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    m = None if mask is None else np.asarray(mask).reshape(-1)
    for i in range(flat.size):
        if m is not None and not m[i]:
            continue
        old = flat[i]
        flat[i] = old + eps
        hi = f(x)
        flat[i] = old - eps
        lo = f(x)
        flat[i] = old
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(analytic, numeric, floor=1e-12):
    """``max |a - n|`` relative to the largest gradient entry of either."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)), floor)
    return float(np.max(np.abs(a - n)) / scale)
