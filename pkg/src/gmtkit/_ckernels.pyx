# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for Riesz kernel sums, treecode traversal and ball moments.

Every function writes into a caller-allocated output buffer and releases the GIL,
so the Python layer can schedule fixed target blocks on a thread pool.  The
pure-NumPy twins live in :mod:`gmtkit._pykernels` and share these signatures.
"""

from libc.math cimport sqrt, pow

cdef inline double _smoothstep(double t) noexcept nogil:
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


cdef inline double _cutoff(double r, double eps, int smooth) noexcept nogil:
    # weight of a source at distance r: hard truncation keeps r > eps,
    # smooth truncation uses the quintic profile of r/eps - 1
    if r == 0.0:
        return 0.0
    if smooth:
        if eps <= 0.0:
            return 1.0
        return _smoothstep(r / eps - 1.0)
    if r > eps:
        return 1.0
    return 0.0


cdef inline double _inv_pow(double r2, double r, int n) noexcept nogil:
    # 1 / r^(n+1)
    if n == 1:
        return 1.0 / r2
    if n == 2:
        return 1.0 / (r2 * r)
    return 1.0 / pow(r, n + 1)


def riesz_sum(const double[:, ::1] targets, const double[:, ::1] sources,
              const double[::1] charges, int n, double eps, int smooth,
              double[:, ::1] out, Py_ssize_t start, Py_ssize_t stop):
    """out[i] = sum_j charges[j] * phi(|t_i - s_j|) * (t_i - s_j) / |t_i - s_j|^(n+1)."""
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t d = targets.shape[1]
    cdef Py_ssize_t ns = sources.shape[0]
    cdef double r2, r, z, c, acc[8]
    if d > 8:
        raise ValueError("ambient dimension above 8 is not supported by the compiled kernels")
    with nogil:
        for i in range(start, stop):
            for k in range(d):
                acc[k] = 0.0
            for j in range(ns):
                r2 = 0.0
                for k in range(d):
                    z = targets[i, k] - sources[j, k]
                    r2 = r2 + z * z
                if r2 == 0.0:
                    continue
                r = sqrt(r2)
                c = _cutoff(r, eps, smooth)
                if c == 0.0:
                    continue
                c = c * charges[j] * _inv_pow(r2, r, n)
                for k in range(d):
                    acc[k] = acc[k] + c * (targets[i, k] - sources[j, k])
            for k in range(d):
                out[i, k] = acc[k]


def riesz_dot(const double[:, ::1] targets, const double[:, ::1] sources,
              const double[::1] charges, const double[:, ::1] vecs, int n,
              double eps, int smooth, double[::1] out, Py_ssize_t start, Py_ssize_t stop):
    """out[i] = sum_j charges[j] * phi * K(t_i - s_j) . vecs[j]."""
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t d = targets.shape[1]
    cdef Py_ssize_t ns = sources.shape[0]
    cdef double r2, r, z, c, dot, acc
    with nogil:
        for i in range(start, stop):
            acc = 0.0
            for j in range(ns):
                r2 = 0.0
                dot = 0.0
                for k in range(d):
                    z = targets[i, k] - sources[j, k]
                    r2 = r2 + z * z
                    dot = dot + z * vecs[j, k]
                if r2 == 0.0:
                    continue
                r = sqrt(r2)
                c = _cutoff(r, eps, smooth)
                if c == 0.0:
                    continue
                acc = acc + c * charges[j] * _inv_pow(r2, r, n) * dot
            out[i] = acc


def tree_eval(const double[:, ::1] targets, const double[:, ::1] sources,
              const double[::1] charges, const double[:, ::1] com,
              const double[::1] mass, const double[::1] bmax,
              const Py_ssize_t[::1] child_start, const Py_ssize_t[::1] child_count,
              const Py_ssize_t[::1] src_start, const Py_ssize_t[::1] src_stop,
              double theta, int n, double eps, int smooth,
              Py_ssize_t[::1] stack, double[:, ::1] out,
              Py_ssize_t start, Py_ssize_t stop):
    """Barnes-Hut traversal with a monopole far field.

    ``sources``/``charges`` are in tree order.  A node is accepted when
    ``bmax < theta * dist`` and the node lies entirely outside the truncation
    zone; leaves that are not accepted are summed directly.
    """
    cdef Py_ssize_t i, j, k, node, top, c0
    cdef Py_ssize_t d = targets.shape[1]
    cdef double r2, r, z, c, dist, reach, acc[8]
    if d > 8:
        raise ValueError("ambient dimension above 8 is not supported by the compiled kernels")
    reach = 2.0 * eps if smooth else eps
    with nogil:
        for i in range(start, stop):
            for k in range(d):
                acc[k] = 0.0
            top = 0
            stack[0] = 0
            top = 1
            while top > 0:
                top = top - 1
                node = stack[top]
                if mass[node] == 0.0:
                    continue
                r2 = 0.0
                for k in range(d):
                    z = targets[i, k] - com[node, k]
                    r2 = r2 + z * z
                dist = sqrt(r2)
                if bmax[node] < theta * dist and dist - bmax[node] > reach:
                    c = mass[node] * _inv_pow(r2, dist, n)
                    for k in range(d):
                        acc[k] = acc[k] + c * (targets[i, k] - com[node, k])
                    continue
                if child_count[node] == 0:
                    for j in range(src_start[node], src_stop[node]):
                        r2 = 0.0
                        for k in range(d):
                            z = targets[i, k] - sources[j, k]
                            r2 = r2 + z * z
                        if r2 == 0.0:
                            continue
                        r = sqrt(r2)
                        c = _cutoff(r, eps, smooth)
                        if c == 0.0:
                            continue
                        c = c * charges[j] * _inv_pow(r2, r, n)
                        for k in range(d):
                            acc[k] = acc[k] + c * (targets[i, k] - sources[j, k])
                    continue
                c0 = child_start[node]
                # push in reverse so children are visited in index order
                for j in range(child_count[node] - 1, -1, -1):
                    stack[top] = c0 + j
                    top = top + 1
            for k in range(d):
                out[i, k] = acc[k]


cdef inline Py_ssize_t _lower_bound(const double[::1] a, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def ball_moments(const double[:, ::1] points, const double[::1] weights,
                 const double[:, ::1] centers, const double[::1] radii,
                 const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                 double[:, ::1] mass, double[:, :, ::1] m1, double[:, :, :, ::1] m2,
                 Py_ssize_t start, Py_ssize_t stop):
    """Zeroth, first and second moments of mu in B(center, r) for ascending radii.

    Moments are taken about the ball center.  Candidate atoms per center come
    as a CSR list; an atom at distance delta joins every ball with r >= delta.
    """
    cdef Py_ssize_t c, p, j, k, l, b, q
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t nr = radii.shape[0]
    cdef double r2, z, w, y[8]
    with nogil:
        for c in range(start, stop):
            for b in range(nr):
                mass[c, b] = 0.0
                for k in range(d):
                    m1[c, b, k] = 0.0
                    for l in range(d):
                        m2[c, b, k, l] = 0.0
            for p in range(indptr[c], indptr[c + 1]):
                j = indices[p]
                r2 = 0.0
                for k in range(d):
                    y[k] = points[j, k] - centers[c, k]
                    r2 = r2 + y[k] * y[k]
                b = _lower_bound(radii, sqrt(r2))
                if b >= nr:
                    continue
                w = weights[j]
                mass[c, b] = mass[c, b] + w
                for k in range(d):
                    m1[c, b, k] = m1[c, b, k] + w * y[k]
                    for l in range(d):
                        m2[c, b, k, l] = m2[c, b, k, l] + w * y[k] * y[l]
            for b in range(1, nr):
                mass[c, b] = mass[c, b] + mass[c, b - 1]
                for k in range(d):
                    m1[c, b, k] = m1[c, b, k] + m1[c, b - 1, k]
                    for l in range(d):
                        m2[c, b, k, l] = m2[c, b, k, l] + m2[c, b - 1, k, l]
