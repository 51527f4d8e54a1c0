"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` loop version (``*_nb``) and a
vectorized numpy version (``*_np``). The public name is bound to one of
them at import time. Set ``RIGSKIN_DISABLE_NUMBA=1`` to force the numpy
path (useful when numba is missing, or for debugging).

The numba kernels are serial on purpose: accumulation order is fixed, so
results do not depend on thread count.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_flag = os.environ.get("RIGSKIN_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag not in ("1", "true", "yes", "on")

# Points are processed in chunks on the numpy path to bound memory.
_CHUNK = 256


def _jit(func):
    if HAVE_NUMBA:
        return njit(cache=True)(func)
    return func


# ---------------------------------------------------------------------------
# Linear blend skinning
# ---------------------------------------------------------------------------


def lbs_blend_np(vertices, weights, transforms):
    blended = np.einsum("nj,jab->nab", weights, transforms)
    return np.einsum("nab,nb->na", blended[:, :3, :3], vertices) + blended[:, :3, 3]


@_jit
def lbs_blend_nb(vertices, weights, transforms):
    n = vertices.shape[0]
    nj = weights.shape[1]
    out = np.empty((n, 3))
    m = np.empty((3, 4))
    for i in range(n):
        for r in range(3):
            for c in range(4):
                m[r, c] = 0.0
        # j ascending, one accumulation per matrix entry
        for j in range(nj):
            w = weights[i, j]
            for r in range(3):
                for c in range(4):
                    m[r, c] += w * transforms[j, r, c]
        x = vertices[i, 0]
        y = vertices[i, 1]
        z = vertices[i, 2]
        for r in range(3):
            out[i, r] = m[r, 0] * x + m[r, 1] * y + m[r, 2] * z + m[r, 3]
    return out


# ---------------------------------------------------------------------------
# Nearest-neighbour squared distances (Chamfer)
# ---------------------------------------------------------------------------


def min_sq_dist_np(a, b):
    out = np.empty(a.shape[0])
    for s in range(0, a.shape[0], _CHUNK):
        ac = a[s:s + _CHUNK]
        dx = ac[:, None, 0] - b[None, :, 0]
        dy = ac[:, None, 1] - b[None, :, 1]
        dz = ac[:, None, 2] - b[None, :, 2]
        out[s:s + _CHUNK] = (dx * dx + dy * dy + dz * dz).min(axis=1)
    return out


@_jit
def min_sq_dist_nb(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for k in range(m):
            dx = a[i, 0] - b[k, 0]
            dy = a[i, 1] - b[k, 1]
            dz = a[i, 2] - b[k, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
        out[i] = best
    return out


def argmin_sq_dist_np(a, b):
    out = np.empty(a.shape[0], dtype=np.int64)
    for s in range(0, a.shape[0], _CHUNK):
        ac = a[s:s + _CHUNK]
        dx = ac[:, None, 0] - b[None, :, 0]
        dy = ac[:, None, 1] - b[None, :, 1]
        dz = ac[:, None, 2] - b[None, :, 2]
        out[s:s + _CHUNK] = (dx * dx + dy * dy + dz * dz).argmin(axis=1)
    return out


@_jit
def argmin_sq_dist_nb(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = np.inf
        arg = 0
        for k in range(m):
            dx = a[i, 0] - b[k, 0]
            dy = a[i, 1] - b[k, 1]
            dz = a[i, 2] - b[k, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
                arg = k
        out[i] = arg
    return out


# ---------------------------------------------------------------------------
# Point to segment set
# ---------------------------------------------------------------------------


def point_segments_min_sq_np(points, seg_a, seg_b):
    d = seg_b - seg_a
    dd = np.einsum("kc,kc->k", d, d)
    safe = np.where(dd > 0.0, dd, 1.0)
    out = np.empty(points.shape[0])
    for s in range(0, points.shape[0], _CHUNK):
        p = points[s:s + _CHUNK]
        ap = p[:, None, :] - seg_a[None, :, :]
        t = np.einsum("pkc,kc->pk", ap, d) / safe
        t = np.where(dd > 0.0, np.clip(t, 0.0, 1.0), 0.0)
        r = ap - t[..., None] * d[None, :, :]
        out[s:s + _CHUNK] = np.einsum("pkc,pkc->pk", r, r).min(axis=1)
    return out


@_jit
def point_segments_min_sq_nb(points, seg_a, seg_b):
    n = points.shape[0]
    k_count = seg_a.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for k in range(k_count):
            dx = seg_b[k, 0] - seg_a[k, 0]
            dy = seg_b[k, 1] - seg_a[k, 1]
            dz = seg_b[k, 2] - seg_a[k, 2]
            ax = points[i, 0] - seg_a[k, 0]
            ay = points[i, 1] - seg_a[k, 1]
            az = points[i, 2] - seg_a[k, 2]
            dd = dx * dx + dy * dy + dz * dz
            t = 0.0
            if dd > 0.0:
                t = (ax * dx + ay * dy + az * dz) / dd
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            rx = ax - t * dx
            ry = ay - t * dy
            rz = az - t * dz
            d = rx * rx + ry * ry + rz * rz
            if d < best:
                best = d
        out[i] = best
    return out


# ---------------------------------------------------------------------------
# Point to triangle set (closest point by Voronoi region, Ericson 5.1.5)
# ---------------------------------------------------------------------------


def _closest_on_triangles_np(p, a, b, c):
    """Closest points for broadcast arrays p (P,1,3) and a, b, c (1,F,3)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    bp = p - b
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    cp = p - c
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    shape = d1.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = np.where(denom != 0.0, vb / denom, 0.0)
        w_in = np.where(denom != 0.0, vc / denom, 0.0)
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    a_b = np.broadcast_to(a, shape + (3,))
    b_b = np.broadcast_to(b, shape + (3,))
    c_b = np.broadcast_to(c, shape + (3,))
    out = a_b + ab * v_in[..., None] + ac * w_in[..., None]

    # Apply regions from lowest to highest priority so the first match wins.
    m = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    out = np.where(m[..., None], b_b + (c - b) * w_bc[..., None], out)
    m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out = np.where(m[..., None], a_b + ac * w_ac[..., None], out)
    m = (d6 >= 0) & (d5 <= d6)
    out = np.where(m[..., None], c_b, out)
    m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out = np.where(m[..., None], a_b + ab * v_ab[..., None], out)
    m = (d3 >= 0) & (d4 <= d3)
    out = np.where(m[..., None], b_b, out)
    m = (d1 <= 0) & (d2 <= 0)
    out = np.where(m[..., None], a_b, out)
    return out


def point_triangles_min_sq_np(points, tris):
    a = tris[None, :, 0, :]
    b = tris[None, :, 1, :]
    c = tris[None, :, 2, :]
    out = np.empty(points.shape[0])
    chunk = max(1, 200000 // max(1, tris.shape[0]))
    for s in range(0, points.shape[0], chunk):
        p = points[s:s + chunk, None, :]
        q = _closest_on_triangles_np(p, a, b, c)
        r = p - q
        out[s:s + chunk] = np.sum(r * r, axis=-1).min(axis=1)
    return out


@_jit
def _seg_sq(px, py, pz, ax, ay, az, bx, by, bz):
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    qx = px - ax
    qy = py - ay
    qz = pz - az
    dd = dx * dx + dy * dy + dz * dz
    t = 0.0
    if dd > 0.0:
        t = (qx * dx + qy * dy + qz * dz) / dd
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    rx = qx - t * dx
    ry = qy - t * dy
    rz = qz - t * dz
    return rx * rx + ry * ry + rz * rz


@_jit
def _tri_sq(px, py, pz, tri):
    ax, ay, az = tri[0, 0], tri[0, 1], tri[0, 2]
    bx, by, bz = tri[1, 0], tri[1, 1], tri[1, 2]
    cx, cy, cz = tri[2, 0], tri[2, 1], tri[2, 2]
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = ax, ay, az
    else:
        bpx, bpy, bpz = px - bx, py - by, pz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = bx, by, bz
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                v = d1 / (d1 - d3)
                qx, qy, qz = ax + v * abx, ay + v * aby, az + v * abz
            else:
                cpx, cpy, cpz = px - cx, py - cy, pz - cz
                d5 = abx * cpx + aby * cpy + abz * cpz
                d6 = acx * cpx + acy * cpy + acz * cpz
                if d6 >= 0.0 and d5 <= d6:
                    qx, qy, qz = cx, cy, cz
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        w = d2 / (d2 - d6)
                        qx, qy, qz = ax + w * acx, ay + w * acy, az + w * acz
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                            qx = bx + w * (cx - bx)
                            qy = by + w * (cy - by)
                            qz = bz + w * (cz - bz)
                        else:
                            denom = va + vb + vc
                            if denom == 0.0:
                                # collinear triangle: fall back to its edges
                                d = _seg_sq(px, py, pz, ax, ay, az, bx, by, bz)
                                d = min(d, _seg_sq(px, py, pz, bx, by, bz, cx, cy, cz))
                                d = min(d, _seg_sq(px, py, pz, ax, ay, az, cx, cy, cz))
                                return d
                            v = vb / denom
                            w = vc / denom
                            qx = ax + abx * v + acx * w
                            qy = ay + aby * v + acy * w
                            qz = az + abz * v + acz * w
    rx = px - qx
    ry = py - qy
    rz = pz - qz
    return rx * rx + ry * ry + rz * rz


@_jit
def point_triangles_min_sq_nb(points, tris):
    n = points.shape[0]
    f = tris.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        for k in range(f):
            d = _tri_sq(px, py, pz, tris[k])
            if d < best:
                best = d
        out[i] = best
    return out


# ---------------------------------------------------------------------------
# Signed ray crossings (Moller-Trumbore)
# ---------------------------------------------------------------------------

# Rays are accepted only strictly in front of the origin and triangles seen
# edge-on are skipped.
_RAY_EPS = 1e-12


def ray_crossings_np(points, dirs, tris):
    """Signed crossing count per (point, ray): +1 exiting a front face, -1 entering."""
    a = tris[:, 0, :]
    e1 = tris[:, 1, :] - a
    e2 = tris[:, 2, :] - a
    out = np.zeros((points.shape[0], dirs.shape[0]), dtype=np.int64)
    for r in range(dirs.shape[0]):
        d = dirs[r]
        h = np.cross(d, e2)
        det = np.einsum("fc,fc->f", e1, h)
        ok = np.abs(det) > _RAY_EPS
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        sign = np.where(det < 0.0, 1, -1)
        for s in range(0, points.shape[0], _CHUNK):
            p = points[s:s + _CHUNK]
            tv = p[:, None, :] - a[None, :, :]
            u = np.einsum("pfc,fc->pf", tv, h) * inv
            q = np.cross(tv, e1[None, :, :])
            v = np.einsum("pfc,c->pf", q, d) * inv
            t = np.einsum("pfc,fc->pf", q, e2) * inv
            hit = ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > _RAY_EPS)
            out[s:s + _CHUNK, r] = np.sum(np.where(hit, sign, 0), axis=1)
    return out


@_jit
def ray_crossings_nb(points, dirs, tris):
    n = points.shape[0]
    nr = dirs.shape[0]
    f = tris.shape[0]
    out = np.zeros((n, nr), dtype=np.int64)
    for k in range(f):
        ax, ay, az = tris[k, 0, 0], tris[k, 0, 1], tris[k, 0, 2]
        e1x = tris[k, 1, 0] - ax
        e1y = tris[k, 1, 1] - ay
        e1z = tris[k, 1, 2] - az
        e2x = tris[k, 2, 0] - ax
        e2y = tris[k, 2, 1] - ay
        e2z = tris[k, 2, 2] - az
        for r in range(nr):
            dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
            hx = dy * e2z - dz * e2y
            hy = dz * e2x - dx * e2z
            hz = dx * e2y - dy * e2x
            det = e1x * hx + e1y * hy + e1z * hz
            if abs(det) <= _RAY_EPS:
                continue
            inv = 1.0 / det
            sign = 1 if det < 0.0 else -1
            for i in range(n):
                tx = points[i, 0] - ax
                ty = points[i, 1] - ay
                tz = points[i, 2] - az
                u = (tx * hx + ty * hy + tz * hz) * inv
                if u < 0.0 or u > 1.0:
                    continue
                qx = ty * e1z - tz * e1y
                qy = tz * e1x - tx * e1z
                qz = tx * e1y - ty * e1x
                v = (dx * qx + dy * qy + dz * qz) * inv
                if v < 0.0 or u + v > 1.0:
                    continue
                t = (e2x * qx + e2y * qy + e2z * qz) * inv
                if t > _RAY_EPS:
                    out[i, r] += sign
    return out


# ---------------------------------------------------------------------------
# Skinning objective as per-vertex / per-edge quadratic forms
# ---------------------------------------------------------------------------


def skin_quadratic_np(x, h, hcoef, bv, edges, k, fa, fb, ecoef):
    """Quadratic part and gradient of the skinning objective.

    Returns ``(value, grad)`` of
    ``sum_i hcoef_i x_i^T H_i x_i - 2 sum_i bv_i.x_i
    + ecoef * sum_e (-2 x_a^T K_e x_b - 2 f_e.x_a + 2 g_e.x_b)``.
    The constant term is added by the caller.
    """
    hx = np.einsum("nij,nj->ni", h, x)
    value = np.sum(hcoef * np.einsum("ni,ni->n", x, hx)) - 2.0 * np.sum(bv * x)
    grad = 2.0 * hcoef[:, None] * hx - 2.0 * bv
    if edges.shape[0]:
        ia = edges[:, 0]
        ib = edges[:, 1]
        kxb = np.einsum("eij,ej->ei", k, x[ib])
        ktxa = np.einsum("eij,ei->ej", k, x[ia])
        value += ecoef * (
            -2.0 * np.sum(x[ia] * kxb) - 2.0 * np.sum(fa * x[ia]) + 2.0 * np.sum(fb * x[ib])
        )
        ga = ecoef * (-2.0 * kxb - 2.0 * fa)
        gb = ecoef * (-2.0 * ktxa + 2.0 * fb)
        np.add.at(grad, ia, ga)
        np.add.at(grad, ib, gb)
    return value, grad


@_jit
def skin_quadratic_nb(x, h, hcoef, bv, edges, k, fa, fb, ecoef):
    n, nj = x.shape
    grad = np.zeros((n, nj))
    value = 0.0
    for i in range(n):
        quad = 0.0
        lin = 0.0
        for r in range(nj):
            s = 0.0
            for c in range(nj):
                s += h[i, r, c] * x[i, c]
            quad += x[i, r] * s
            lin += bv[i, r] * x[i, r]
            grad[i, r] = 2.0 * hcoef[i] * s - 2.0 * bv[i, r]
        value += hcoef[i] * quad - 2.0 * lin
    for e in range(edges.shape[0]):
        a = edges[e, 0]
        b = edges[e, 1]
        cross = 0.0
        lin = 0.0
        for r in range(nj):
            s = 0.0
            t = 0.0
            for c in range(nj):
                s += k[e, r, c] * x[b, c]
                t += k[e, c, r] * x[a, c]
            cross += x[a, r] * s
            lin += -fa[e, r] * x[a, r] + fb[e, r] * x[b, r]
            grad[a, r] += ecoef * (-2.0 * s - 2.0 * fa[e, r])
            grad[b, r] += ecoef * (-2.0 * t + 2.0 * fb[e, r])
        value += ecoef * (-2.0 * cross + 2.0 * lin)
    return value, grad


_IMPLS = {
    "lbs_blend": (lbs_blend_nb, lbs_blend_np),
    "min_sq_dist": (min_sq_dist_nb, min_sq_dist_np),
    "argmin_sq_dist": (argmin_sq_dist_nb, argmin_sq_dist_np),
    "point_segments_min_sq": (point_segments_min_sq_nb, point_segments_min_sq_np),
    "point_triangles_min_sq": (point_triangles_min_sq_nb, point_triangles_min_sq_np),
    "ray_crossings": (ray_crossings_nb, ray_crossings_np),
    "skin_quadratic": (skin_quadratic_nb, skin_quadratic_np),
}


def backend():
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"


def get(name, use_numba=None):
    """Look up a kernel by name, optionally overriding the backend choice."""
    nb, np_ = _IMPLS[name]
    if use_numba is None:
        use_numba = USE_NUMBA
    return nb if (use_numba and HAVE_NUMBA) else np_


lbs_blend = get("lbs_blend")
min_sq_dist = get("min_sq_dist")
argmin_sq_dist = get("argmin_sq_dist")
point_segments_min_sq = get("point_segments_min_sq")
point_triangles_min_sq = get("point_triangles_min_sq")
ray_crossings = get("ray_crossings")
skin_quadratic = get("skin_quadratic")
