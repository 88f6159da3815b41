"""Finite atomic measures and ball-level density statistics.

All balls are closed: an atom at distance exactly ``r`` from the center lies
in ``B(x, r)``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .spatial import make_index, exact_filter

WINDOW_K = 8.0


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise InvalidArgument("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def scaled(self, lam):
        return Ball(self.center, lam * self.radius)

    def contains(self, points):
        y = np.atleast_2d(points) - self.center
        return np.sqrt(np.einsum("ij,ij->i", y, y)) <= self.radius


@dataclass(frozen=True)
class DensityStats:
    theta: float
    p_mu: float
    is_p_doubling: bool
    constant_used: float


class PointMeasure:
    """Weighted atoms in R^d with a resolution floor ``h``.

    The object is treated as immutable; derived structures (range index,
    k-d tree, bounding ball) are built lazily and cached.
    """

    def __init__(self, points, weights, h=None, index_kind=None):
        pts = np.array(points, dtype=float, ndmin=2)
        w = np.array(weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise InvalidArgument("points and weights differ in length")
        if pts.shape[0] == 0:
            raise InvalidArgument("a measure needs at least one atom")
        if pts.shape[1] < 2:
            raise InvalidArgument("ambient dimension must be at least 2")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise InvalidArgument("weights must be positive and finite")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("points must be finite")
        if h is None:
            h = default_floor(pts)
        if not h > 0:
            raise InvalidArgument("resolution floor must be positive")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.h = float(h)
        self._index_kind = index_kind
        self._index = None
        self._tree = None
        self._bball = None

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def n(self):
        return self.points.shape[1] - 1

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    @property
    def index(self):
        if self._index is None:
            self._index = make_index(self.points, self.h, self._index_kind)
        return self._index

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def query(self, center, radius):
        """Sorted ids of atoms in the closed ball B(center, radius)."""
        return self.index.query(np.asarray(center, dtype=float), float(radius))

    def ids_in(self, b):
        return self.query(b.center, b.radius)

    def bounding_ball(self):
        if self._bball is None:
            c = 0.5 * (self.points.min(axis=0) + self.points.max(axis=0))
            y = self.points - c
            r = float(np.sqrt(np.einsum("ij,ij->i", y, y)).max())
            self._bball = (c, r)
        return self._bball

    def diameter_bound(self):
        return 2.0 * self.bounding_ball()[1]

    def restrict(self, ids):
        ids = np.asarray(ids, dtype=np.intp)
        return PointMeasure(self.points[ids], self.weights[ids], self.h)

    def with_weights(self, weights):
        return PointMeasure(self.points, weights, self.h)

    def transformed(self, rotation=None, shift=None, scale=1.0, mass_scale=1.0):
        p = self.points
        if rotation is not None:
            p = p @ np.asarray(rotation, dtype=float).T
        p = scale * p
        if shift is not None:
            p = p + np.asarray(shift, dtype=float)
        return PointMeasure(p, mass_scale * self.weights, self.h * scale)

    def __repr__(self):
        return f"PointMeasure(N={len(self)}, d={self.d}, mass={self.total_mass:.6g}, h={self.h:.3g})"


def default_floor(points):
    """Half the smallest non-zero nearest-neighbour distance (1.0 for a single point)."""
    if len(points) < 2:
        return 1.0
    dist, _ = cKDTree(points).query(points, k=2)
    nz = dist[:, 1][dist[:, 1] > 0]
    if len(nz) == 0:
        return 1.0
    return 0.5 * float(nz.min())


def enclosing_ball(mu):
    """Closed ball about the bounding-box midpoint containing every atom (radius at least h)."""
    c, r = mu.bounding_ball()
    return Ball(c.copy(), max(r, mu.h))


def _as_ball(b, radius=None):
    if isinstance(b, Ball):
        return b
    return Ball(b, radius)


def mass_in_ball(mu, b):
    ids = mu.ids_in(b)
    return float(np.sum(mu.weights[ids]))


def theta(mu, b):
    return mass_in_ball(mu, b) / b.radius ** mu.n


def radial_profile(mu, x, rmax=None, ids=None):
    """Sorted distances from x and cumulative masses, optionally within rmax / a subset."""
    x = np.asarray(x, dtype=float)
    if ids is None:
        if rmax is None:
            sel = np.arange(len(mu))
        else:
            sel = mu.query(x, rmax)
    else:
        sel = np.asarray(ids, dtype=np.intp)
        if rmax is not None:
            sel = exact_filter(mu.points, sel, x, rmax)
    y = mu.points[sel] - x
    dist = np.sqrt(np.einsum("ij,ij->i", y, y))
    order = np.argsort(dist, kind="stable")
    return dist[order], np.cumsum(mu.weights[sel][order])


def _mass_at(dist, cum, r):
    """Mass of the closed ball of radius r (scalar or array) from a radial profile."""
    k = np.searchsorted(dist, r, side="right")
    padded = np.concatenate([[0.0], cum])
    out = padded[k]
    return float(out) if np.ndim(out) == 0 else out


def p_mu(mu, b):
    """Sum_j 2^-j Theta(2^j B), exact terms until 2^j B covers supp mu, then a closed-form tail."""
    n = mu.n
    c, r = b.center, b.radius
    bc, br = mu.bounding_ball()
    reach = float(np.linalg.norm(c - bc)) + br
    J = 0
    while (2.0 ** J) * r < reach:
        J += 1
    total = 0.0
    if J > 0:
        dist, cum = radial_profile(mu, c)
        radii = r * 2.0 ** np.arange(J)
        masses = _mass_at(dist, cum, radii)
        total = float(np.sum(2.0 ** -np.arange(J) * masses / radii ** n))
    tail = mu.total_mass / r ** n * 2.0 ** (-J * (n + 1)) / (1.0 - 2.0 ** (-(n + 1)))
    return total + tail


def p_mu_terms(mu, b, count):
    """The first ``count`` terms 2^-j Theta(2^j B), evaluated directly (used as an oracle)."""
    return [2.0 ** -j * theta(mu, b.scaled(2.0 ** j)) for j in range(count)]


def density_stats(mu, b, c=4.0):
    t = theta(mu, b)
    p = p_mu(mu, b)
    return DensityStats(theta=t, p_mu=p, is_p_doubling=bool(p <= c * t), constant_used=float(c))


def is_p_doubling(mu, b, c=4.0):
    if c < 1:
        raise InvalidArgument("doubling constant must be >= 1")
    return bool(p_mu(mu, b) <= c * theta(mu, b))


def _max_density_sorted(dist, cum, n, rmin, rmax):
    best = _mass_at(dist, cum, rmin) / rmin ** n
    if len(dist) == 0:
        return best
    last = np.ones(len(dist), dtype=bool)
    last[:-1] = dist[1:] != dist[:-1]
    sel = last & (dist > rmin) & (dist <= rmax)
    if np.any(sel):
        best = max(best, float(np.max(cum[sel] / dist[sel] ** n)))
    return best


def m_n(mu, x, r_range, ids=None):
    """sup of Theta(x, r) over r in [r_min, r_max], taken over the jump radii.

    ``ids`` restricts the measure to a subset of atoms (e.g. M_n(chi_B mu)).
    """
    rmin, rmax = float(r_range[0]), float(r_range[1])
    if rmin > rmax:
        raise InvalidArgument("empty radius range")
    if rmin < mu.h * (1 - 1e-12):
        raise InvalidArgument("r_min must not go below the resolution floor")
    dist, cum = radial_profile(mu, x, rmax, ids)
    return _max_density_sorted(dist, cum, mu.n, rmin, rmax)


def m_n_batch(mu, xs, rmin, rmax, ids=None):
    """m_n at many points; ``ids`` restricts the measure."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if rmin > rmax:
        raise InvalidArgument("empty radius range")
    if ids is None:
        pts, w = mu.points, mu.weights
        tree = mu.tree
    else:
        ids = np.asarray(ids, dtype=np.intp)
        pts, w = mu.points[ids], mu.weights[ids]
        tree = cKDTree(pts) if len(ids) else None
    out = np.zeros(len(xs))
    if tree is None:
        return out
    lists = tree.query_ball_point(xs, rmax * (1 + 1e-9) + 1e-300)
    n = mu.n
    for i, cand in enumerate(lists):
        cand = np.asarray(cand, dtype=np.intp)
        y = pts[cand] - xs[i]
        dist = np.sqrt(np.einsum("ij,ij->i", y, y))
        keep = dist <= rmax
        dist, ww = dist[keep], w[cand][keep]
        order = np.argsort(dist, kind="stable")
        out[i] = _max_density_sorted(dist[order], np.cumsum(ww[order]), n, rmin, rmax)
    return out


def theta_star_upper(mu, x, K=WINDOW_K):
    """Windowed stand-in for the upper density: sup of Theta(x, r) for r in [h, K h]."""
    return m_n(mu, x, (mu.h, K * mu.h))


def theta_star_batch(mu, xs, K=WINDOW_K):
    return m_n_batch(mu, xs, mu.h, K * mu.h)
