"""Closed-ball range queries over a fixed point set.

Two interchangeable indexes: a uniform grid (default) and a k-d tree used for
very large clouds.  Both gather a candidate superset and then apply the same
exact filter, so they return identical index arrays.
"""
import numpy as np
from scipy.spatial import cKDTree

KD_THRESHOLD = 1_000_000


def exact_filter(points, ids, center, radius):
    """Keep the ids whose points satisfy |p - center| <= radius, sorted ascending."""
    ids = np.sort(np.asarray(ids, dtype=np.intp))
    if len(ids) == 0:
        return ids
    y = points[ids] - center
    dist = np.sqrt(np.einsum("ij,ij->i", y, y))
    return ids[dist <= radius]


class KDIndex:
    kind = "kdtree"

    def __init__(self, points):
        self.points = points
        self.tree = cKDTree(points)

    def query(self, center, radius):
        cand = self.tree.query_ball_point(center, radius * (1 + 1e-9) + 1e-300)
        return exact_filter(self.points, cand, center, radius)


class GridIndex:
    """Uniform grid with cells of side ``max(h*sqrt(d), extent / N^(1/d))``.

    The second term keeps the number of cells at most about N when h is
    tiny compared with the extent of the cloud.
    """
    kind = "grid"

    def __init__(self, points, h):
        self.points = points
        npts, d = points.shape
        self.lo = points.min(axis=0)
        extent = float(np.max(points.max(axis=0) - self.lo)) if npts else 0.0
        cell = max(h * np.sqrt(d), extent / max(npts, 1) ** (1.0 / d), 1e-300)
        if extent > 0:
            cell = max(cell, extent * 1e-12)
        self.cell = cell
        coords = np.floor((points - self.lo) / cell).astype(np.int64)
        self.shape = coords.max(axis=0) + 1 if npts else np.ones(d, dtype=np.int64)
        keys = np.ravel_multi_index(coords.T, self.shape)
        self.order = np.argsort(keys, kind="stable")
        self.keys = keys[self.order]

    def query(self, center, radius):
        center = np.asarray(center, dtype=float)
        d = len(center)
        lo = np.floor((center - radius - self.lo) / self.cell).astype(np.int64) - 1
        hi = np.floor((center + radius - self.lo) / self.cell).astype(np.int64) + 1
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, self.shape - 1)
        if np.any(hi < lo):
            return np.zeros(0, dtype=np.intp)
        span = hi - lo + 1
        if np.prod(span.astype(float)) > len(self.points):
            return exact_filter(self.points, np.arange(len(self.points)), center, radius)
        axes = [np.arange(lo[k], hi[k] + 1) for k in range(d)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        cells = np.ravel_multi_index(grid.T, self.shape)
        a = np.searchsorted(self.keys, cells, side="left")
        b = np.searchsorted(self.keys, cells, side="right")
        if len(a) == 0 or not np.any(b > a):
            return np.zeros(0, dtype=np.intp)
        cand = np.concatenate([self.order[i:j] for i, j in zip(a, b) if j > i])
        return exact_filter(self.points, cand, center, radius)


def make_index(points, h, kind=None):
    if kind is None:
        kind = "kdtree" if len(points) > KD_THRESHOLD else "grid"
    if kind == "kdtree":
        return KDIndex(points)
    if kind == "grid":
        return GridIndex(points, h)
    raise ValueError(f"unknown index kind {kind!r}")


def neighbor_csr(points, centers, radius, tree=None):
    """CSR candidate lists of atoms within ``radius`` of each center (superset-safe)."""
    if tree is None:
        tree = cKDTree(points)
    lists = tree.query_ball_point(centers, radius * (1 + 1e-9) + 1e-300)
    counts = np.fromiter((len(x) for x in lists), dtype=np.intp, count=len(lists))
    indptr = np.zeros(len(lists) + 1, dtype=np.intp)
    np.cumsum(counts, out=indptr[1:])
    indices = np.zeros(indptr[-1], dtype=np.intp)
    for i, x in enumerate(lists):
        indices[indptr[i]:indptr[i + 1]] = np.sort(x)
    return indptr, indices
