"""Beta coefficients, the Jones-Wolff square function and its integral over a ball."""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .errors import InvalidArgument
from .spatial import neighbor_csr

LOG_STEP = 2.0 ** -0.5


@dataclass
class PlaneFit:
    base: np.ndarray
    normal: np.ndarray
    beta: float
    p: float
    empty: bool = False
    converged: bool = True
    objective: float = 0.0  # r^-n sum w (dist/r)^p, i.e. beta^p


def plane_objective(points, weights, base, normal, r, n, p):
    dist = np.abs((points - base) @ normal)
    return float(np.sum(weights * (dist / r) ** p) / r ** n)


def _ball_atoms(mu, b):
    ids = mu.ids_in(b)
    return mu.points[ids], mu.weights[ids]


def _empty_fit(d, center, p):
    normal = np.zeros(d)
    normal[-1] = 1.0
    return PlaneFit(np.array(center, dtype=float), normal, 0.0, p, empty=True)


def beta2(mu, b):
    """Exact L2 plane fit: through the weighted centroid, normal = least eigenvector."""
    pts, w = _ball_atoms(mu, b)
    if len(w) == 0:
        return _empty_fit(mu.d, b.center, 2)
    m = w.sum()
    centroid = (w[:, None] * pts).sum(axis=0) / m
    y = pts - centroid
    cov = (w[:, None] * y).T @ y
    vals, vecs = np.linalg.eigh(cov)
    lam = max(float(vals[0]), 0.0)
    r, n = b.radius, mu.n
    return PlaneFit(centroid, vecs[:, 0], float(np.sqrt(lam / r ** (n + 2))), 2, objective=lam / r ** (n + 2))


def _weighted_median(x, w):
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    c = np.cumsum(w)
    k = int(np.searchsorted(c, 0.5 * c[-1], side="left"))
    return float(x[min(k, len(x) - 1)])


def _l1_cost(pts, w, normal):
    """Optimal offset for a fixed normal is a weighted median of the projections."""
    proj = pts @ normal
    t = _weighted_median(proj, w)
    return float(np.sum(w * np.abs(proj - t))), t


def _normal_from_angles(ang, d):
    if d == 2:
        return np.array([np.cos(ang[0]), np.sin(ang[0])])
    st = np.sin(ang[0])
    return np.array([st * np.cos(ang[1]), st * np.sin(ang[1]), np.cos(ang[0])])


def _angles_from_normal(v):
    if len(v) == 2:
        return np.array([np.arctan2(v[1], v[0])])
    v = v / np.linalg.norm(v)
    return np.array([np.arccos(np.clip(v[2], -1, 1)), np.arctan2(v[1], v[0])])


def _pair_search(pts, w):
    """d = 2: some L1-optimal line passes through two atoms; check every pair."""
    best = (np.inf, None)
    for i, j in combinations(range(len(pts)), 2):
        t = pts[j] - pts[i]
        nt = np.linalg.norm(t)
        if nt == 0:
            continue
        normal = np.array([-t[1], t[0]]) / nt
        cost, off = _l1_cost(pts, w, normal)
        if cost < best[0]:
            best = (cost, normal)
    return best


def beta_p(mu, b, p=2, tol=1e-8, max_iter=200, exact_pairs_max=60):
    """beta_{p,mu} for p in {1, 2}.

    p = 1 runs iteratively reweighted least squares from the L2 plane, then a
    shrinking local search over normal angles.  In the plane, small ball
    populations are also solved exactly by enumerating lines through atom pairs.
    """
    if p == 2:
        return beta2(mu, b)
    if p != 1:
        raise InvalidArgument("p must be 1 or 2")
    fit2 = beta2(mu, b)
    if fit2.empty:
        return _empty_fit(mu.d, b.center, 1)
    pts, w = _ball_atoms(mu, b)
    r, n, d = b.radius, mu.n, mu.d
    if d > 3:
        raise InvalidArgument("beta_1 is implemented for d = 2, 3")
    best_normal = fit2.normal / np.linalg.norm(fit2.normal)
    best_cost, _ = _l1_cost(pts, w, best_normal)
    normal = best_normal.copy()
    converged = False
    prev = best_cost
    for _ in range(max_iter):
        cost, t = _l1_cost(pts, w, normal)
        res = np.abs(pts @ normal - t)
        rw = w / np.maximum(res, 1e-12 * r)
        c = (rw[:, None] * pts).sum(axis=0) / rw.sum()
        y = pts - c
        vals, vecs = np.linalg.eigh((rw[:, None] * y).T @ y)
        normal = vecs[:, 0]
        cost, _ = _l1_cost(pts, w, normal)
        if cost < best_cost:
            best_cost, best_normal = cost, normal
        if abs(prev - cost) <= tol * max(prev, 1e-300):
            converged = True
            break
        prev = cost
    if d == 2 and len(pts) <= exact_pairs_max:
        cost, normal = _pair_search(pts, w)
        if normal is not None and cost < best_cost:
            best_cost, best_normal = cost, normal
    # local refinement over angles
    ang = _angles_from_normal(best_normal)
    step = 0.05
    while step > 1e-10:
        improved = False
        for k in range(len(ang)):
            for s in (-step, step):
                trial = ang.copy()
                trial[k] += s
                nv = _normal_from_angles(trial, d)
                cost, _ = _l1_cost(pts, w, nv)
                if cost < best_cost:
                    best_cost, best_normal, ang, improved = cost, nv, trial, True
        if not improved:
            step *= 0.5
    cost, t = _l1_cost(pts, w, best_normal)
    obj = cost / r ** (n + 1)
    return PlaneFit(best_normal * t, best_normal, obj, 1, converged=converged, objective=obj)


def log_grid(r_min, r_max, step=LOG_STEP):
    """Interval edges r_max, r_max*step, ... clipped at r_min; returns (midpoints, log-widths)."""
    if not 0 < r_min < r_max:
        raise InvalidArgument("need 0 < r_min < r_max")
    edges = [r_max]
    while edges[-1] * step > r_min * (1 + 1e-12):
        edges.append(edges[-1] * step)
    edges.append(r_min)
    edges = np.array(edges)
    mids = np.sqrt(edges[:-1] * edges[1:])
    widths = np.log(edges[:-1] / edges[1:])
    return mids, widths


def beta2_theta_profile(mu, centers, radii, block=256):
    """beta_2(x, r)^2 * Theta(x, r) for every center and radius (radii ascending)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float)
    n = mu.n
    out = np.zeros((len(centers), len(radii)))
    for a in range(0, len(centers), block):
        c = centers[a:a + block]
        indptr, indices = neighbor_csr(mu.points, c, radii[-1], mu.tree)
        mass, m1, m2 = kernels.ball_moments(mu.points, mu.weights, c, radii, indptr, indices)
        with np.errstate(invalid="ignore", divide="ignore"):
            cov = m2 - m1[..., :, None] * m1[..., None, :] / mass[..., None, None]
        cov[mass == 0] = 0.0
        lam = np.maximum(np.linalg.eigvalsh(cov)[..., 0], 0.0)
        out[a:a + block] = lam / radii ** (n + 2) * mass / radii ** n
    return out


def jones_wolff(mu, x, r_min, r_max, step=LOG_STEP):
    """(int beta_2^2 Theta dr/r)^(1/2) by the midpoint rule in log r."""
    if r_min < mu.h * (1 - 1e-12):
        raise InvalidArgument("r_min must not go below the resolution floor")
    mids, widths = log_grid(r_min, r_max, step)
    order = np.argsort(mids)
    prof = beta2_theta_profile(mu, np.asarray(x, dtype=float)[None, :], mids[order])[0]
    return float(np.sqrt(np.sum(prof * widths[order])))


def square_function_lhs(mu, b0, r_max=None, step=LOG_STEP, r_min=None):
    """Sum over atoms x in b0 of w(x) * J(x)^2 with J on [h, 2 rad(b0)]."""
    ids = mu.ids_in(b0)
    if len(ids) == 0:
        return 0.0
    r_max = 2.0 * b0.radius if r_max is None else r_max
    r_min = mu.h if r_min is None else r_min
    mids, widths = log_grid(r_min, r_max, step)
    order = np.argsort(mids)
    prof = beta2_theta_profile(mu, mu.points[ids], mids[order])
    j2 = prof @ widths[order]
    return float(np.sum(mu.weights[ids] * j2))
