"""Riesz transform of atomic measures: truncated, smooth, maximal, principal value.

Kernel K(z) = z / |z|^(n+1).  Zero-distance pairs never contribute, which makes
the value at an atom the self-excluded sum.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyDomain, InvalidArgument
from .treecode import build_tree


@dataclass(frozen=True)
class KernelConfig:
    eps: float = 0.0
    smooth: bool = False

    def __post_init__(self):
        if self.eps < 0:
            raise InvalidArgument("eps must be non-negative")


PV = KernelConfig()


def bump(t):
    """Quintic smoothstep profile: 0 on [0, 1], 1 on [2, inf), C^2 in between (argument |x|/eps)."""
    s = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def riesz_field(mu, targets=None, cfg=PV, charges=None, mask=None):
    """R_eps of mu (or of charges*mu) at the given targets, default all atoms."""
    src, q = mu.points, mu.weights if charges is None else np.asarray(charges, dtype=float)
    if mask is not None:
        src, q = src[mask], q[mask]
    t = mu.points if targets is None else np.atleast_2d(np.asarray(targets, dtype=float))
    return kernels.riesz_sum(t, src, q, mu.n, cfg.eps, cfg.smooth)


def riesz_at(mu, x, cfg=PV):
    return riesz_field(mu, np.asarray(x, dtype=float)[None, :], cfg)[0]


def riesz_pv(mu, i):
    """Self-excluded sum at atom i."""
    return riesz_field(mu, mu.points[i][None, :], PV)[0]


def riesz_pv_all(mu, treecode_angle=None):
    if treecode_angle is None:
        return riesz_field(mu)
    return treecode_riesz(mu, mu.points, PV, treecode_angle)


def _contributions(mu, x):
    y = x - mu.points
    dist = np.sqrt(np.einsum("ij,ij->i", y, y))
    keep = dist > 0
    y, dist, w = y[keep], dist[keep], mu.weights[keep]
    return dist, (w / dist ** (mu.n + 1))[:, None] * y


def riesz_star(mu, x, eps_list=None):
    """sup over eps of |R_eps mu(x)| for the hard truncation.

    The truncated sum only changes at the distinct atom distances, so the sup
    is a max over those jumps.  With ``eps_list`` the sup is restricted to
    eps in [min(eps_list), max(eps_list)].
    """
    x = np.asarray(x, dtype=float)
    dist, v = _contributions(mu, x)
    if len(dist) == 0:
        return 0.0
    order = np.argsort(-dist, kind="stable")
    dist, v = dist[order], v[order]
    # tail[k] = sum of contributions with distance >= dist[k]; group ties
    tail = np.cumsum(v, axis=0)
    last = np.ones(len(dist), dtype=bool)
    last[:-1] = dist[1:] != dist[:-1]
    jump_d, jump_v = dist[last], tail[last]
    vals = np.sqrt(np.einsum("ij,ij->i", jump_v, jump_v))
    if eps_list is None:
        return float(vals.max())
    e = np.asarray(eps_list, dtype=float)
    if e.size == 0:
        raise InvalidArgument("eps_list must be non-empty")
    lo, hi = float(e.min()), float(e.max())
    # value on [d_{k+1}, d_k) equals jump_v[k]; eps in [lo, hi] meets that interval when d_k > lo and d_{k+1} <= hi
    nxt = np.concatenate([jump_d[1:], [0.0]])
    sel = (jump_d > lo) & (nxt <= hi)
    return float(vals[sel].max()) if np.any(sel) else 0.0


def riesz_star_smooth(mu, x, ratio=np.sqrt(2.0)):
    """sup of |smoothly truncated R| over a geometric eps grid spanning the atom distances."""
    x = np.asarray(x, dtype=float)
    dist, _ = _contributions(mu, x)
    if len(dist) == 0:
        return 0.0
    eps = dist.min() / 2.0
    best = 0.0
    while eps <= dist.max():
        val = riesz_at(mu, x, KernelConfig(eps, True))
        best = max(best, float(np.linalg.norm(val)))
        eps *= ratio
    return best


def oscillation_l2(mu, b, field):
    """Sum over atoms in b of w |field - weighted mean|^2."""
    ids = mu.ids_in(b)
    if len(ids) == 0:
        raise EmptyDomain("ball carries no atoms")
    f = np.asarray(field, dtype=float)
    f = f.reshape(len(mu), -1)[ids]
    w = mu.weights[ids]
    mean = (w[:, None] * f).sum(axis=0) / w.sum()
    dev = f - mean
    return float(np.sum(w * np.einsum("ij,ij->i", dev, dev)))


def riesz_apply(mu, f, mask=None):
    """(R_mu f)(x_i) = sum_{j != i} w_j f_j K(x_i - x_j): scalar field in, vector field out."""
    f = np.asarray(f, dtype=float)
    return riesz_field(mu, charges=mu.weights * f, mask=mask)


def riesz_apply_dot(mu, g, mask=None):
    """sum_{j != i} w_j K(x_i - x_j) . g_j: vector field in, scalar field out."""
    g = np.asarray(g, dtype=float).reshape(len(mu), mu.d)
    src, q, v = mu.points, mu.weights, g
    if mask is not None:
        src, q, v = src[mask], q[mask], v[mask]
    return kernels.riesz_dot(mu.points, src, q, v, mu.n)


def riesz_adjoint_apply(mu, g, mask=None):
    """(R*_mu g)(x_i) = -sum_{j != i, j in mask} w_j K(x_i - x_j) . g_j."""
    return -riesz_apply_dot(mu, g, mask)


def _restricted_matrix(mu, ids):
    """Dense (d*m, m) matrix sqrt(w_i) K_c(x_i - x_j) sqrt(w_j); used as an oracle on small sets."""
    p, w = mu.points[ids], mu.weights[ids]
    z = p[:, None, :] - p[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", z, z))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(r[..., None] > 0, z / r[..., None] ** (mu.n + 1), 0.0)
    sw = np.sqrt(w)
    a = sw[:, None, None] * k * sw[None, :, None]
    return np.concatenate([a[:, :, c] for c in range(mu.d)], axis=0)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def operator_norm_estimate(mu, b, iterations=1000, tol=1e-6):
    """Power iteration for the L2(mu|b) -> L2(mu|b) norm of the self-excluded Riesz operator."""
    ids = mu.ids_in(b)
    if len(ids) < 2:
        raise EmptyDomain("need at least two atoms in the ball")
    p, w = mu.points[ids], mu.weights[ids]
    sw = np.sqrt(w)
    n = mu.n
    m = len(ids)
    u = 1.0 + 0.1 * np.sin(np.arange(m) + 1.0)
    u /= np.linalg.norm(u)
    sigma_old = 0.0
    converged = False
    it = 0
    for it in range(1, iterations + 1):
        y = sw[:, None] * kernels.riesz_sum(p, p, sw * u, n)
        v = -sw * kernels.riesz_dot(p, p, sw, y, n)
        lam = float(np.dot(u, v))
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return NormEstimate(0.0, it, True)
        u = v / nv
        sigma = np.sqrt(max(lam, 0.0))
        if abs(sigma - sigma_old) <= tol * max(sigma, 1e-300):
            converged = True
            break
        sigma_old = sigma
    # final Rayleigh quotient with the normalized iterate
    y = sw[:, None] * kernels.riesz_sum(p, p, sw * u, n)
    sigma = float(np.sqrt(np.sum(y * y)))
    return NormEstimate(sigma, it, converged)


def treecode_riesz(mu, targets, cfg=PV, opening_angle=0.5, leaf_size=16, tree=None):
    """Barnes-Hut approximation of R_eps mu at the targets (monopole far field)."""
    if not 0.0 <= opening_angle < 1.0:
        raise InvalidArgument("opening angle must lie in [0, 1)")
    if tree is None:
        tree = build_tree(mu.points, mu.weights, leaf_size)
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    return kernels.tree_eval(tree, t, opening_angle, mu.n, cfg.eps, cfg.smooth)
