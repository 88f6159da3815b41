"""Backend selection and block scheduling for the summation kernels.

The compiled module is used when it imports; setting ``GMTKIT_BACKEND=python``
forces the NumPy fallback.  Work is split into fixed target blocks, so the
arithmetic done for any given target never depends on the thread count.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

_requested = os.environ.get("GMTKIT_BACKEND", "").strip().lower()
if _requested == "python":
    _compiled = None
else:
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
BLOCK = 256
_threads = 1


def set_threads(k):
    global _threads
    _threads = max(1, int(k))


def get_threads():
    return _threads


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    if backend == "python":
        return _pykernels
    raise ValueError(f"unknown backend {backend!r}")


def _blocks(total):
    return [(a, min(total, a + BLOCK)) for a in range(0, total, BLOCK)]


def run_blocks(func, total):
    """Call ``func(start, stop)`` over fixed blocks, possibly on a thread pool."""
    blocks = _blocks(total)
    if _threads <= 1 or len(blocks) <= 1:
        for a, b in blocks:
            func(a, b)
        return
    with ThreadPoolExecutor(max_workers=_threads) as ex:
        for _ in ex.map(lambda ab: func(*ab), blocks):
            pass


def _f64(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    return a


def riesz_sum(targets, sources, charges, n, eps=0.0, smooth=False, backend=None):
    """Sum_j charges_j * phi_eps(|t - s_j|) * (t - s_j)/|t - s_j|^(n+1) for every target."""
    mod = _impl(backend)
    t, s, q = _f64(targets, 2), _f64(sources, 2), _f64(charges, 1)
    out = np.zeros_like(t)
    if len(s) == 0:
        return out
    run_blocks(lambda a, b: mod.riesz_sum(t, s, q, int(n), float(eps), int(bool(smooth)), out, a, b), len(t))
    return out


def riesz_dot(targets, sources, charges, vecs, n, eps=0.0, smooth=False, backend=None):
    """Sum_j charges_j * phi_eps * K(t - s_j) . vecs_j for every target."""
    mod = _impl(backend)
    t, s, q, v = _f64(targets, 2), _f64(sources, 2), _f64(charges, 1), _f64(vecs, 2)
    out = np.zeros(len(t))
    if len(s) == 0:
        return out
    run_blocks(lambda a, b: mod.riesz_dot(t, s, q, v, int(n), float(eps), int(bool(smooth)), out, a, b), len(t))
    return out


def tree_eval(tree, targets, theta, n, eps=0.0, smooth=False, backend=None):
    mod = _impl(backend)
    t = _f64(targets, 2)
    out = np.zeros_like(t)

    def work(a, b):
        stack = np.zeros(tree.stack_size, dtype=np.intp)
        mod.tree_eval(t, tree.points, tree.charges, tree.com, tree.mass, tree.bmax,
                      tree.child_start, tree.child_count, tree.src_start, tree.src_stop,
                      float(theta), int(n), float(eps), int(bool(smooth)), stack, out, a, b)

    run_blocks(work, len(t))
    return out


def ball_moments(points, weights, centers, radii, indptr, indices, backend=None):
    """Mass, first and second moments (about each center) for ascending radii."""
    mod = _impl(backend)
    p, w, c, r = _f64(points, 2), _f64(weights, 1), _f64(centers, 2), _f64(radii, 1)
    ip = np.ascontiguousarray(indptr, dtype=np.intp)
    ix = np.ascontiguousarray(indices, dtype=np.intp)
    nc, nr, d = len(c), len(r), p.shape[1]
    mass = np.zeros((nc, nr))
    m1 = np.zeros((nc, nr, d))
    m2 = np.zeros((nc, nr, d, d))
    run_blocks(lambda a, b: mod.ball_moments(p, w, c, r, ip, ix, mass, m1, m2, a, b), nc)
    return mass, m1, m2
