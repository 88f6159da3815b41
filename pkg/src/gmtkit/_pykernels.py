"""NumPy implementations of the hot loops.

Signatures mirror the compiled module so :mod:`gmtkit.kernels` can swap them.
Each function fills ``out[start:stop]`` in place.
"""
import numpy as np


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _cutoff(r, eps, smooth):
    if smooth:
        if eps <= 0.0:
            c = np.ones_like(r)
        else:
            c = _smoothstep(r / eps - 1.0)
    else:
        c = (r > eps).astype(float)
    c[r == 0.0] = 0.0
    return c


def _kernel_block(t, sources, charges, n, eps, smooth):
    z = t[:, None, :] - sources[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", z, z)
    r = np.sqrt(r2)
    c = _cutoff(r, eps, smooth)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(c > 0.0, 1.0 / r ** (n + 1), 0.0)
    return z, c * inv * charges[None, :]


def _chunk(nsrc):
    # keep the temporary (targets x sources x d) arrays near a few MB
    return max(1, min(512, 200000 // max(nsrc, 1)))


def riesz_sum(targets, sources, charges, n, eps, smooth, out, start, stop):
    step = _chunk(len(sources))
    for a in range(start, stop, step):
        b = min(stop, a + step)
        z, coef = _kernel_block(targets[a:b], sources, charges, n, eps, smooth)
        out[a:b] = np.einsum("ij,ijk->ik", coef, z)


def riesz_dot(targets, sources, charges, vecs, n, eps, smooth, out, start, stop):
    step = _chunk(len(sources))
    for a in range(start, stop, step):
        b = min(stop, a + step)
        z, coef = _kernel_block(targets[a:b], sources, charges, n, eps, smooth)
        out[a:b] = np.einsum("ij,ijk,jk->i", coef, z, vecs)


def tree_eval(targets, sources, charges, com, mass, bmax, child_start, child_count,
              src_start, src_stop, theta, n, eps, smooth, stack, out, start, stop):
    """Breadth-style traversal: each node is visited once with the targets reaching it."""
    reach = 2.0 * eps if smooth else eps
    idx = np.arange(start, stop)
    acc = np.zeros((len(idx), targets.shape[1]))
    pending = [(0, np.arange(len(idx)))]
    while pending:
        node, sel = pending.pop()
        if mass[node] == 0.0 or len(sel) == 0:
            continue
        t = targets[idx[sel]]
        z = t - com[node]
        dist = np.sqrt(np.einsum("ij,ij->i", z, z))
        ok = (bmax[node] < theta * dist) & (dist - bmax[node] > reach)
        if ok.any():
            zz = z[ok]
            dd = dist[ok]
            acc[sel[ok]] += (mass[node] / dd ** (n + 1))[:, None] * zz
        rest = sel[~ok]
        if len(rest) == 0:
            continue
        if child_count[node] == 0:
            s0, s1 = src_start[node], src_stop[node]
            zt, coef = _kernel_block(targets[idx[rest]], sources[s0:s1], charges[s0:s1], n, eps, smooth)
            acc[rest] += np.einsum("ij,ijk->ik", coef, zt)
            continue
        c0 = child_start[node]
        for j in range(child_count[node] - 1, -1, -1):
            pending.append((c0 + j, rest))
    out[start:stop] = acc


def ball_moments(points, weights, centers, radii, indptr, indices, mass, m1, m2, start, stop):
    nr = len(radii)
    d = points.shape[1]
    for c in range(start, stop):
        ids = indices[indptr[c]:indptr[c + 1]]
        y = points[ids] - centers[c]
        b = np.searchsorted(radii, np.sqrt(np.einsum("ij,ij->i", y, y)), side="left")
        keep = b < nr
        b, y, w = b[keep], y[keep], weights[ids][keep]
        mass[c] = np.cumsum(np.bincount(b, weights=w, minlength=nr))
        for k in range(d):
            m1[c, :, k] = np.cumsum(np.bincount(b, weights=w * y[:, k], minlength=nr))
            for l in range(d):
                m2[c, :, k, l] = np.cumsum(np.bincount(b, weights=w * y[:, k] * y[:, l], minlength=nr))
