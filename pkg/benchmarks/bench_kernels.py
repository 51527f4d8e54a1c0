"""Time each compiled kernel against its numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call of each kernel is excluded (compilation warm-up).
"""

import argparse
import time

import numpy as np

from rigskin import _kernels
from rigskin.fixtures import make_character
from rigskin.solvers.sdf import RAY_DIRECTIONS


def _stochastic(rng, n, j):
    w = rng.random((n, j))
    return w / w.sum(axis=1, keepdims=True)


def _rigid(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, 3, 3)))
    t = np.zeros((n, 4, 4))
    t[:, :3, :3] = q
    t[:, :3, 3] = rng.standard_normal((n, 3))
    t[:, 3, 3] = 1.0
    return t


def cases(rng):
    """Representative inputs for every kernel, sized like the biped workloads."""
    mesh = make_character("biped_simple", seed=0).mesh
    tris = mesh.triangles()
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    pts = rng.uniform(lo, hi, (2000, 3))
    n, j, e = 2000, 25, 6000
    h = rng.standard_normal((n, 4, 4))
    return {
        "lbs_blend": (rng.standard_normal((n, 3)), _stochastic(rng, n, j), _rigid(rng, j)),
        "min_sq_dist": (pts, rng.standard_normal((3000, 3))),
        "argmin_sq_dist": (pts, rng.standard_normal((3000, 3))),
        "point_segments_min_sq": (pts, rng.standard_normal((24, 3)), rng.standard_normal((24, 3))),
        "point_triangles_min_sq": (pts[:500], tris),
        "ray_crossings": (pts[:500], RAY_DIRECTIONS, tris),
        "skin_quadratic": (_stochastic(rng, n, 4), h @ h.transpose(0, 2, 1), rng.random(n),
                           rng.standard_normal((n, 4)), rng.integers(0, n, (e, 2)),
                           rng.standard_normal((e, 4, 4)), rng.standard_normal((e, 4)),
                           rng.standard_normal((e, 4)), 0.5),
    }


def best_of(func, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, inputs in cases(rng).items():
        f_np = _kernels.get(name, use_numba=False)
        f_nb = _kernels.get(name, use_numba=True)
        f_nb(*inputs)  # compile
        t_np = best_of(f_np, inputs, args.repeat)
        t_nb = best_of(f_nb, inputs, args.repeat)
        print(f"{name:<24}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
