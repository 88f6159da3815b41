"""Greedy construction of a nested cube lattice on the support of an atomic measure.

Level k uses the radius r_k = root_scale * A0^-k.  Its centers form a greedy
net among the atoms with pairwise distances > 10 r_k (so the balls 5B(Q) are
disjoint), seeded by the centers of level k-1.  Each level-(k+1) center hangs
below its nearest level-k center and every atom below its nearest finest-level
center; a cube is the set of atoms below its center.  Chaining the net radii
gives Q within 13.4 r_k of x_Q for A0 = 4, well inside 28 B(Q), and B(Q) ∩ E ⊂ Q
whenever A0 > 3.5.
"""
from dataclasses import dataclass, field
from math import floor, log

import numpy as np
from scipy.spatial import cKDTree

from .errors import DepthExhausted, InvalidArgument
from .measure import Ball


@dataclass(frozen=True)
class LatticeParams:
    C0: float = 2.0
    A0: float = 4.0
    max_depth: int | None = None
    strict: bool = False

    def __post_init__(self):
        if not self.C0 > 1:
            raise InvalidArgument("C0 must exceed 1")
        if not self.A0 > 2:
            raise InvalidArgument("A0 must exceed 2")

    def Cd(self, n):
        return 4.0 * self.A0 ** n


@dataclass(eq=False)
class Cube:
    level: int
    index: int
    center_id: int
    center: np.ndarray
    r: float
    ell: float
    atom_ids: np.ndarray
    parent: int = -1
    children: list = field(default_factory=list)

    @property
    def key(self):
        return (self.level, self.index)

    def ball(self, lam=1.0):
        """lam * B(Q)."""
        return Ball(self.center, lam * self.r)

    def big_ball(self, lam=1.0):
        """lam * B_Q with B_Q = 28 B(Q)."""
        return Ball(self.center, lam * 28.0 * self.r)

    def __repr__(self):
        return f"Cube(level={self.level}, index={self.index}, atoms={len(self.atom_ids)})"


@dataclass(frozen=True)
class CubeFlags:
    db: bool
    p_doubling: bool
    bucket: float
    p_value: float


@dataclass(frozen=True)
class CubeEnergy:
    e_lambda: float
    e_inf: float
    db_flag: bool
    depth: int


def _greedy_net(points, order, seeds, sep, tree):
    """Centers with pairwise distance > sep: seeds first, then atoms in ``order``."""
    covered = np.zeros(len(points), dtype=bool)
    chosen = []

    def take(i):
        chosen.append(i)
        cand = np.asarray(tree.query_ball_point(points[i], sep * (1 + 1e-9) + 1e-300), dtype=np.intp)
        y = points[cand] - points[i]
        covered[cand[np.sqrt(np.einsum("ij,ij->i", y, y)) <= sep]] = True

    for i in seeds:
        take(i)
    for i in order:
        if not covered[i]:
            take(i)
    return np.array(chosen, dtype=np.intp)


class Lattice:
    def __init__(self, mu, params, root_scale, levels, labels, truncated):
        self.mu = mu
        self.params = params
        self.root_scale = root_scale
        self.levels = levels
        self.labels = labels
        self.truncated = truncated
        self._cache = {}

    @property
    def depth(self):
        return len(self.levels) - 1

    def r_k(self, k):
        return self.root_scale * self.params.A0 ** (-k)

    def ell_k(self, k):
        return 56.0 * self.params.C0 * self.r_k(k)

    def cube(self, level, index):
        return self.levels[level][index]

    def cubes(self):
        for lev in self.levels:
            yield from lev

    def roots(self):
        return list(self.levels[0])

    def parent(self, Q):
        if Q.level == 0:
            return None
        return self.levels[Q.level - 1][Q.parent]

    def children(self, Q):
        if Q.level >= self.depth:
            return []
        return [self.levels[Q.level + 1][i] for i in Q.children]

    def ancestors(self, Q, include_self=True):
        out = [Q] if include_self else []
        P = self.parent(Q)
        while P is not None:
            out.append(P)
            P = self.parent(P)
        return out

    def descendants(self, Q, include_self=True):
        out = [Q] if include_self else []
        stack = self.children(Q)[::-1]
        while stack:
            P = stack.pop()
            out.append(P)
            stack.extend(self.children(P)[::-1])
        return out

    def mass(self, Q):
        return float(np.sum(self.mu.weights[Q.atom_ids]))

    def ball_mass(self, center, radius):
        return float(np.sum(self.mu.weights[self.mu.query(center, radius)]))

    def mass_2BQ(self, Q):
        key = ("2BQ", Q.key)
        if key not in self._cache:
            self._cache[key] = self.ball_mass(Q.center, 56.0 * Q.r)
        return self._cache[key]

    def density(self, Q):
        """mu(2B_Q) / ell(Q)^n."""
        return self.mass_2BQ(Q) / Q.ell ** self.mu.n

    def theta_disc(self, Q):
        """Discrete density A0^(kn) of the bucket holding mu(2B_Q)/ell(Q)^n."""
        return bucket(self.density(Q), self.params.A0, self.mu.n)

    def p_value(self, Q):
        n = self.mu.n
        return float(sum(Q.ell / R.ell ** (n + 1) * self.mass_2BQ(R) for R in self.ancestors(Q)))

    def atoms_at(self, level, ids=None):
        return self.labels[level] if ids is None else self.labels[level][ids]

    def to_dict(self):
        def node(Q):
            flags = cube_flags(self, Q)
            return {
                "level": Q.level,
                "center": Q.center.tolist(),
                "r_Q": Q.r,
                "ell": Q.ell,
                "mass": self.mass(Q),
                "flags": {"db": flags.db, "p_doubling": flags.p_doubling, "bucket": flags.bucket},
                "children": [node(S) for S in self.children(Q)],
            }
        return {
            "params": {"A0": self.params.A0, "C0": self.params.C0, "depth": self.depth,
                       "root_scale": self.root_scale, "truncated": self.truncated},
            "roots": [node(Q) for Q in self.roots()],
        }


def bucket(value, A0, n):
    """A0^(kn) with value in [A0^(kn), A0^((k+1)n)); 0 for value <= 0."""
    if value <= 0:
        return 0.0
    base = A0 ** n
    k = floor(log(value) / log(base))
    while base ** k > value:
        k -= 1
    while base ** (k + 1) <= value:
        k += 1
    return float(base ** k)


def build_lattice(mu, params=None):
    params = params or LatticeParams()
    pts, w, h = mu.points, mu.weights, mu.h
    diam = mu.diameter_bound()
    root_scale = diam / 10.0 if diam > 0 else h
    A0 = params.A0
    if params.max_depth is None:
        depth = max(0, int(np.ceil(np.log(root_scale / h) / np.log(A0)))) if root_scale > h else 0
    else:
        depth = int(params.max_depth)
        if depth < 0:
            raise InvalidArgument("max_depth must be non-negative")
    truncated = root_scale * A0 ** (-depth) > h * (1 + 1e-12)
    if truncated and params.strict:
        raise DepthExhausted(f"max_depth={depth} stops above the resolution floor h={h:g}")
    tree = mu.tree
    order = np.lexsort((np.arange(len(w)), -w))
    nets = []
    prev = np.zeros(0, dtype=np.intp)
    for k in range(depth + 1):
        net = _greedy_net(pts, order, prev, 10.0 * root_scale * A0 ** (-k), tree)
        nets.append(net)
        prev = net
    # parent links between consecutive nets (nearest coarser center)
    parents = [None]
    for k in range(1, depth + 1):
        _, j = cKDTree(pts[nets[k - 1]]).query(pts[nets[k]])
        parents.append(np.asarray(j, dtype=np.intp))
    _, fin = cKDTree(pts[nets[depth]]).query(pts)
    labels = [None] * (depth + 1)
    labels[depth] = np.asarray(fin, dtype=np.intp)
    for k in range(depth, 0, -1):
        labels[k - 1] = parents[k][labels[k]]
    levels = []
    for k in range(depth + 1):
        rk = root_scale * A0 ** (-k)
        lab = labels[k]
        srt = np.argsort(lab, kind="stable")
        bounds = np.searchsorted(lab[srt], np.arange(len(nets[k]) + 1))
        cubes = []
        for i, cid in enumerate(nets[k]):
            ids = srt[bounds[i]:bounds[i + 1]]
            cubes.append(Cube(k, i, int(cid), pts[cid].copy(), rk, 56.0 * params.C0 * rk, ids,
                              parent=int(parents[k][i]) if k > 0 else -1))
        levels.append(cubes)
    for k in range(1, depth + 1):
        for Q in levels[k]:
            levels[k - 1][Q.parent].children.append(Q.index)
    return Lattice(mu, params, root_scale, levels, labels, bool(truncated))


def check_invariants(lat):
    """Exact checks of the structural properties; returns a dict of booleans."""
    mu = lat.mu
    pts = mu.points
    N = len(mu)
    out = {"partition": True, "nesting": True, "disjoint_5B": True, "inside_28B": True, "ball_in_cube": True}
    for k, lev in enumerate(lat.levels):
        seen = np.zeros(N, dtype=np.intp)
        for Q in lev:
            seen[Q.atom_ids] += 1
            y = pts[Q.atom_ids] - Q.center
            if np.any(np.sqrt(np.einsum("ij,ij->i", y, y)) > 28.0 * Q.r):
                out["inside_28B"] = False
            inball = mu.query(Q.center, Q.r)
            if not np.all(lat.labels[k][inball] == Q.index):
                out["ball_in_cube"] = False
            if k > 0:
                par = lat.levels[k - 1][Q.parent]
                if not np.all(lat.labels[k - 1][Q.atom_ids] == par.index):
                    out["nesting"] = False
        if not np.all(seen == 1):
            out["partition"] = False
        centers = np.array([Q.center for Q in lev])
        if len(centers) > 1:
            sep = 10.0 * lev[0].r
            for i, j in cKDTree(centers).query_pairs(sep * (1 + 1e-9)):
                if np.sqrt(np.sum((centers[i] - centers[j]) ** 2)) <= sep:
                    out["disjoint_5B"] = False
    return out


def cube_flags(lat, Q):
    p = lat.params
    n = lat.mu.n
    m_b = lat.ball_mass(Q.center, Q.r)
    m_100 = lat.ball_mass(Q.center, 100.0 * Q.r)
    pv = lat.p_value(Q)
    return CubeFlags(
        db=bool(m_100 <= p.C0 * m_b),
        p_doubling=bool(pv <= p.Cd(n) * lat.mass_2BQ(Q) / Q.ell ** n),
        bucket=lat.theta_disc(Q),
        p_value=pv,
    )


def region_mask(lat, Q, lam, mode="cubes"):
    """Atoms of lam*Q: same-generation cubes within lam*ell(Q) of x_Q ("cubes") or E ∩ lam*B_Q ("metric")."""
    mu = lat.mu
    mask = np.zeros(len(mu), dtype=bool)
    if mode == "metric":
        mask[mu.query(Q.center, lam * 28.0 * Q.r)] = True
        return mask
    if mode != "cubes":
        raise InvalidArgument(f"unknown region mode {mode!r}")
    near = mu.query(Q.center, lam * Q.ell)
    for idx in np.unique(lat.labels[Q.level][near]):
        mask[lat.levels[Q.level][idx].atom_ids] = True
    return mask


def cubes_inside(lat, mask, level):
    """Cubes at levels >= level whose atoms all lie in mask (the family D_mu(lam Q))."""
    out = []
    for k in range(level, lat.depth + 1):
        lab = lat.labels[k]
        size = np.bincount(lab, minlength=len(lat.levels[k]))
        inside = np.bincount(lab[mask], minlength=len(lat.levels[k]))
        out.extend(lat.levels[k][i] for i in np.flatnonzero((inside == size) & (size > 0)))
    return out


def hd_k(lat, Q, k, mask=None):
    """Maximal cubes P with ell(P) < ell(Q) and Theta(P) >= A0^(kn) Theta(Q) (discrete densities).

    The search runs over the whole lattice; ``mask`` limits it to cubes meeting the atom mask.
    """
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    if Q.level >= lat.depth:
        return []
    thr = lat.params.A0 ** (k * lat.mu.n) * lat.theta_disc(Q)
    start = lat.levels[Q.level + 1]
    if mask is not None:
        hit = np.unique(lat.labels[Q.level + 1][mask])
        start = [start[i] for i in hit]
    out = []
    stack = list(start)[::-1]
    while stack:
        P = stack.pop()
        if lat.theta_disc(P) >= thr:
            out.append(P)
        else:
            stack.extend(lat.children(P)[::-1])
    return out


def energies(lat, Q, lam=1.0, M0=1.0, mode="cubes"):
    """E(lam Q), E_inf(lam Q) and the DB(M0) flag, all truncated at the lattice depth."""
    if lam < 1:
        raise InvalidArgument("lambda must be >= 1")
    e_lam, e_inf = _energy_pair(lat, Q, lam, mode)
    _, e9 = _energy_pair(lat, Q, 9.0, mode)
    mask9 = region_mask(lat, Q, 9.0, mode)
    m9 = float(np.sum(lat.mu.weights[mask9]))
    db = e9 >= M0 ** 2 * lat.theta_disc(Q) ** 2 * m9
    return CubeEnergy(e_lam, e_inf, bool(db), lat.depth)


def _energy_pair(lat, Q, lam, mode):
    mask = region_mask(lat, Q, lam, mode)
    fam = cubes_inside(lat, mask, Q.level)
    e = sum((P.ell / Q.ell) ** 0.75 * lat.theta_disc(P) ** 2 * lat.mass(P) for P in fam)
    inside = {P.key for P in fam}
    top = max((lat.theta_disc(P) for P in lat.cubes() if P.level > Q.level), default=0.0)
    base = lat.theta_disc(Q)
    e_inf = 0.0
    k = 1
    while base > 0 and lat.params.A0 ** (k * lat.mu.n) * base <= top:
        fam_k = [P for P in hd_k(lat, Q, k, mask) if P.key in inside]
        val = sum((P.ell / Q.ell) ** 0.5 * lat.theta_disc(P) ** 2 * lat.mass(P) for P in fam_k)
        e_inf = max(e_inf, val)
        k += 1
    return float(e), float(e_inf)


def _children_groups(lat, Q):
    if Q.level >= lat.depth:
        return [np.array([i]) for i in Q.atom_ids]
    return [S.atom_ids for S in lat.children(Q)]


def delta_q(lat, Q, f):
    """Delta_Q f = sum_S m_S(f) chi_S - m_Q(f) chi_Q over the children S of Q.

    Below the finest level the children are the individual atoms, so the
    expansion over D_mu(R) telescopes down to f itself.
    """
    f = np.asarray(f, dtype=float)
    w = lat.mu.weights
    out = np.zeros_like(f)
    ids = Q.atom_ids

    def mean(sel):
        ww = w[sel]
        return np.tensordot(ww, f[sel], axes=(0, 0)) / ww.sum()

    for sel in _children_groups(lat, Q):
        out[sel] = mean(sel)
    out[ids] = out[ids] - mean(ids)
    return out


def l2_norm_sq(mu, f):
    f = np.asarray(f, dtype=float).reshape(len(mu), -1)
    return float(np.sum(mu.weights * np.sum(f * f, axis=1)))


def inner_region(lat, Q, kappa0):
    """Atoms x of Q with dist(x, supp mu minus Q) >= kappa0 * ell(Q)."""
    mu = lat.mu
    inside = np.zeros(len(mu), dtype=bool)
    inside[Q.atom_ids] = True
    outside = np.flatnonzero(~inside)
    if len(outside) == 0:
        return Q.atom_ids.copy()
    dist, _ = cKDTree(mu.points[outside]).query(mu.points[Q.atom_ids])
    return Q.atom_ids[dist >= kappa0 * Q.ell]


def boundary_mass_ratio(lat, Q, t):
    """mu({x in Q : dist(x, E minus Q) < t ell(Q)}) / mu(3.5 B_Q): measured, never asserted."""
    inner = inner_region(lat, Q, t)
    thin = lat.mass(Q) - float(np.sum(lat.mu.weights[inner]))
    return thin / lat.ball_mass(Q.center, 3.5 * 28.0 * Q.r)
