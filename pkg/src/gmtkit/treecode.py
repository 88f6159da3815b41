"""Barnes-Hut source tree for Riesz kernel sums.

Cells are 2^d-tree boxes; the far field of a cell is its total mass placed at
the center of mass.  ``bmax`` is the largest distance from that center to an
atom of the cell, and the acceptance test is ``bmax < theta * dist``.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgument


@dataclass
class SourceTree:
    points: np.ndarray     # atoms in tree order
    charges: np.ndarray
    perm: np.ndarray       # tree order -> original index
    com: np.ndarray
    mass: np.ndarray
    bmax: np.ndarray
    child_start: np.ndarray
    child_count: np.ndarray
    src_start: np.ndarray
    src_stop: np.ndarray
    stack_size: int

    @property
    def n_nodes(self):
        return len(self.mass)


def build_tree(points, charges, leaf_size=16, max_depth=64):
    points = np.ascontiguousarray(points, dtype=float)
    charges = np.ascontiguousarray(charges, dtype=float)
    if np.any(charges < 0):
        raise InvalidArgument("the monopole treecode needs non-negative charges")
    npts, d = points.shape
    perm = np.arange(npts)
    lo, hi = points.min(axis=0), points.max(axis=0)
    # per node: (start, stop, box center, half width, depth)
    nodes = [(0, npts, 0.5 * (lo + hi), 0.5 * float(np.max(hi - lo)), 0)]
    child_start, child_count = [], []
    bits = 1 << np.arange(d)
    i = 0
    while i < len(nodes):
        s, e, c, hw, depth = nodes[i]
        if e - s <= leaf_size or hw <= 0 or depth >= max_depth:
            child_start.append(0)
            child_count.append(0)
            i += 1
            continue
        ids = perm[s:e]
        code = ((points[ids] > c) * bits).sum(axis=1)
        order = np.argsort(code, kind="stable")
        perm[s:e] = ids[order]
        code = code[order]
        child_start.append(len(nodes))
        cnt = 0
        for octant in np.unique(code):
            a = s + int(np.searchsorted(code, octant, side="left"))
            b = s + int(np.searchsorted(code, octant, side="right"))
            sign = np.where((octant & bits) > 0, 1.0, -1.0)
            nodes.append((a, b, c + 0.5 * hw * sign, 0.5 * hw, depth + 1))
            cnt += 1
        child_count.append(cnt)
        i += 1
    m = len(nodes)
    src_start = np.array([nd[0] for nd in nodes], dtype=np.intp)
    src_stop = np.array([nd[1] for nd in nodes], dtype=np.intp)
    tp = np.ascontiguousarray(points[perm])
    tq = np.ascontiguousarray(charges[perm])
    # prefix sums give node masses and first moments in one pass
    cq = np.concatenate([[0.0], np.cumsum(tq)])
    cx = np.vstack([np.zeros(d), np.cumsum(tq[:, None] * tp, axis=0)])
    mass = cq[src_stop] - cq[src_start]
    with np.errstate(invalid="ignore", divide="ignore"):
        com = (cx[src_stop] - cx[src_start]) / mass[:, None]
    for k in np.flatnonzero(~np.isfinite(com).all(axis=1)):
        com[k] = tp[src_start[k]:src_stop[k]].mean(axis=0)
    bmax = np.zeros(m)
    for k in range(m):
        y = tp[src_start[k]:src_stop[k]] - com[k]
        bmax[k] = np.sqrt(np.einsum("ij,ij->i", y, y).max())
    depth = max(nd[4] for nd in nodes)
    return SourceTree(tp, tq, perm, np.ascontiguousarray(com), mass, bmax,
                      np.array(child_start, dtype=np.intp), np.array(child_count, dtype=np.intp),
                      src_start, src_stop, stack_size=(2 ** d) * (depth + 2) + 1)
