"""Stopping families, surrogate measures, good balls and the variational minimizer."""
from dataclasses import dataclass, field
from math import ceil, log

import numpy as np

from . import kernels
from .errors import DepthExhausted, EmptyDomain, InvalidArgument, PreconditionViolated
from .lattice import inner_region
from .measure import Ball, PointMeasure, m_n_batch, mass_in_ball
from .riesz import PV, riesz_field
from .sampling import ball_points, exact_split, sphere_points


# ---------------------------------------------------------------- stopping families

@dataclass
class StoppingFamily:
    fmax: list
    ld: list
    stop: dict          # LD cube key -> list of stop cubes
    stop0: list
    r0_mask: np.ndarray
    theta0: float
    kappa0: float
    eps0: float
    stop0_mass: float
    r0_mass: float
    threshold_met: bool

    @property
    def stop_all(self):
        return [P for Q in self.ld for P in self.stop[Q.key]]


def _atom_mask(mu, b):
    m = np.zeros(len(mu), dtype=bool)
    m[mu.ids_in(b)] = True
    return m


def r0_family(lat, b0):
    """Maximal cubes meeting 1.5 B0 and contained in 1.8 B0, plus the atom mask of their union."""
    mu = lat.mu
    in15 = _atom_mask(mu, b0.scaled(1.5))
    in18 = _atom_mask(mu, b0.scaled(1.8))
    fmax = []
    stack = lat.roots()[::-1]
    while stack:
        Q = stack.pop()
        if not np.any(in15[Q.atom_ids]):
            continue
        if np.all(in18[Q.atom_ids]):
            fmax.append(Q)
        else:
            stack.extend(lat.children(Q)[::-1])
    mask = np.zeros(len(mu), dtype=bool)
    for Q in fmax:
        mask[Q.atom_ids] = True
    return fmax, mask


def _levels_below(lat, theta0):
    # ell(P) <= theta0^(1/(n+1)) ell(Q)  <=>  level(P) - level(Q) >= s
    n = lat.mu.n
    target = theta0 ** (1.0 / (n + 1))
    if target >= 1:
        return 0
    return int(ceil(log(1.0 / target) / log(lat.params.A0) - 1e-12))


def build_stopping(mu, lat, b0, theta0=0.05, kappa0=0.1, eps0=0.05):
    if not theta0 > 0:
        raise InvalidArgument("theta0 must be positive")
    n = mu.n
    fmax, r0 = r0_family(lat, b0)
    theta_b0 = mass_in_ball(mu, b0) / b0.radius ** n
    ld = []
    stack = list(fmax)[::-1]
    while stack:
        Q = stack.pop()
        rad = 3.5 * 28.0 * Q.r
        if lat.ball_mass(Q.center, rad) / rad ** n <= theta0 * theta_b0:
            ld.append(Q)
        else:
            stack.extend(lat.children(Q)[::-1])
    s = _levels_below(lat, theta0)
    stop = {}
    for Q in ld:
        lev = Q.level + s
        if lev > lat.depth:
            raise DepthExhausted(f"stopping level {lev} lies below the lattice depth {lat.depth}")
        start = [P for P in lat.descendants(Q) if P.level == lev]
        fam = []
        st = start[::-1]
        while st:
            P = st.pop()
            if lat.ball_mass(P.center, 100.0 * P.r) <= lat.params.C0 * lat.ball_mass(P.center, P.r):
                fam.append(P)
            else:
                st.extend(lat.children(P)[::-1])
        stop[Q.key] = fam
    allstop = [P for Q in ld for P in stop[Q.key]]
    allstop.sort(key=lambda P: (-lat.mass(P), P.level, P.index))
    r0_mass = float(np.sum(mu.weights[r0]))
    target = (1.0 - 2.0 * eps0) * r0_mass
    stop0, acc = [], 0.0
    for P in allstop:
        if acc > target:
            break
        stop0.append(P)
        acc += lat.mass(P)
    return StoppingFamily(fmax, ld, stop, stop0, r0, theta0, kappa0, eps0, acc, r0_mass, bool(acc > target))


# ---------------------------------------------------------------- surrogates

@dataclass
class SurrogateMeasure:
    measure: PointMeasure
    kind: str
    provenance: list    # (cube key, start, stop, target mass)

    def block_masses(self):
        from math import fsum
        w = self.measure.weights
        return [(key, fsum(w[a:b]), m) for key, a, b, m in self.provenance]


def _assemble(mu, keep_ids, blocks, kind):
    pts = [mu.points[keep_ids]]
    wts = [mu.weights[keep_ids]]
    prov = []
    pos = len(keep_ids)
    for key, samples, mass in blocks:
        w = exact_split(mass, len(samples))
        pts.append(samples)
        wts.append(w)
        prov.append((key, pos, pos + len(samples), mass))
        pos += len(samples)
    if pos == 0:
        raise EmptyDomain(f"{kind} surrogate has no atoms left")
    P = np.vstack(pts)
    W = np.concatenate(wts)
    return SurrogateMeasure(PointMeasure(P, W, None), kind, prov)


def build_surrogate(mu, lat, kind, k=None, b0=None, family=None, m_samples=64):
    """Mass-preserving replacements.

    sigma_k / sigma_tilde_k: for level-k cubes meeting 2B0, the mass mu(Q ∩ 2B0) is
    moved to the sphere (resp. solid ball) of radius r(Q)/10 about x_Q.
    mu0: mu off R0 plus mu on the inner regions of the Stop0 cubes.
    eta: mu0 off R0 plus, per Stop0 cube, mu0(Q) spread uniformly over B(Q)/4.
    """
    from math import fsum
    N = len(mu)
    if kind in ("sigma_k", "sigma_tilde_k"):
        if k is None or b0 is None:
            raise InvalidArgument("sigma surrogates need a level k and a ball b0")
        if k > lat.depth:
            raise DepthExhausted(f"level {k} exceeds lattice depth {lat.depth}")
        in2 = _atom_mask(mu, b0.scaled(2.0))
        blocks = []
        for Q in lat.levels[k]:
            sel = Q.atom_ids[in2[Q.atom_ids]]
            if len(sel) == 0:
                continue
            mass = fsum(mu.weights[sel])
            if kind == "sigma_k":
                samples = sphere_points(Q.center, Q.r / 10.0, m_samples)
            else:
                samples = ball_points(Q.center, Q.r / 10.0, m_samples)
            blocks.append((Q.key, samples, mass))
        return _assemble(mu, np.flatnonzero(~in2), blocks, kind)
    if family is None:
        raise InvalidArgument(f"{kind} needs a stopping family")
    outside = np.flatnonzero(~family.r0_mask)
    if kind == "mu0":
        keep = [outside] + [inner_region(lat, Q, family.kappa0) for Q in family.stop0]
        keep = np.sort(np.concatenate(keep))
        if len(keep) == 0:
            raise EmptyDomain("mu0 keeps no atoms (kappa0 * ell(Q) exceeds every inner region)")
        return SurrogateMeasure(PointMeasure(mu.points[keep], mu.weights[keep], mu.h), kind, [])
    if kind == "eta":
        blocks = []
        for Q in family.stop0:
            inner = inner_region(lat, Q, family.kappa0)
            mass = fsum(mu.weights[inner])
            if mass <= 0:
                continue
            blocks.append((Q.key, ball_points(Q.center, Q.r / 4.0, m_samples), mass))
        return _assemble(mu, outside, blocks, kind)
    raise InvalidArgument(f"unknown surrogate kind {kind!r}")


# ---------------------------------------------------------------- good balls

@dataclass
class GoodBallResult:
    good: bool
    integral: float
    rhs: float
    ids: np.ndarray
    maximal: np.ndarray


def restricted_maximal(mu, b):
    """M_n(chi_B mu) at the atoms of B, over radii [h, 2 rad(B)] (beyond that it only decreases)."""
    ids = mu.ids_in(b)
    if len(ids) == 0:
        raise EmptyDomain("ball carries no mass")
    vals = m_n_batch(mu, mu.points[ids], mu.h, max(2.0 * b.radius, mu.h), ids=ids)
    return ids, vals


def good_ball(mu, b, c2):
    """(mu, C2)-good test: int_B M_n(chi_B mu) dmu <= C2 Theta(B) mu(B)."""
    ids, vals = restricted_maximal(mu, b)
    w = mu.weights[ids]
    mass = float(w.sum())
    integral = float(np.sum(w * vals))
    rhs = c2 * mass / b.radius ** mu.n * mass
    return GoodBallResult(bool(integral <= rhs), integral, rhs, ids, vals)


@dataclass
class FrostmanResult:
    ids: np.ndarray
    sigma: PointMeasure
    mass_e: float
    mass_b: float
    bound: float
    sigma_mass: float
    max_sigma_density: float


def frostman_extract(mu, b, c2):
    """Chebyshev selection E = {M_n(chi_B mu) <= 2 C2 Theta(B)} and sigma = mu|E / (2 C2 Theta(B))."""
    res = good_ball(mu, b, c2)
    if not res.good:
        raise PreconditionViolated("ball is not (mu, C2)-good")
    n = mu.n
    theta_b = float(np.sum(mu.weights[res.ids])) / b.radius ** n
    sel = res.maximal <= 2.0 * c2 * theta_b
    ids = res.ids[sel]
    scale = 1.0 / (2.0 * c2 * theta_b)
    sigma = PointMeasure(mu.points[ids], mu.weights[ids] * scale, mu.h)
    # sup over all r >= h; beyond the diameter of E the density only decreases
    dens = m_n_batch(sigma, sigma.points, sigma.h, max(2.0 * b.radius, sigma.h))
    return FrostmanResult(ids, sigma, float(np.sum(mu.weights[ids])), float(np.sum(mu.weights[res.ids])),
                          b.radius ** n / (8.0 * c2), float(np.sum(sigma.weights)), float(dens.max()))


def greedy_cover_content(points, n, h):
    """Upper estimate of the n-dimensional Hausdorff content (radius convention) by greedy covers."""
    pts = np.atleast_2d(points)
    c = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    R = float(np.sqrt(np.sum((pts - c) ** 2, axis=1)).max())
    best = max(R, h) ** n
    rho = max(R, h)
    while rho >= h:
        uncovered = np.ones(len(pts), dtype=bool)
        count = 0
        for i in range(len(pts)):
            if uncovered[i]:
                count += 1
                y = pts - pts[i]
                uncovered &= np.sqrt(np.einsum("ij,ij->i", y, y)) > rho
        best = min(best, count * rho ** n)
        rho *= 0.5
    return best


# ---------------------------------------------------------------- variational problem

@dataclass
class VariationalState:
    a: np.ndarray
    p: float
    lam: float
    c_R0: np.ndarray
    F: float
    F1: float
    sigma_p: float
    history: list
    nu_b1: float
    mu_b1: float
    line_search_failed: bool = False
    iterations: int = 0
    residual_max: float = float("nan")
    residual_rhs: float = float("nan")
    residual_fraction: float = float("nan")
    extras: dict = field(default_factory=dict)


class VariationalProblem:
    """F(a) for nu_a = mu off R0 + a mu on R0, with a on the atoms of R0.

    F(a) = sum_{R0} nu_a |R nu_a - c|^p
           + lam sigma_p(B1) (max(a)^p + mu(B1)/nu_a(B1) + (1/N) sum_k mu(2^k B1)/nu_a(2^k B1)).
    """

    def __init__(self, mu, r0, b1, N, p, lam, c=None):
        if not 1 < p <= 2:
            raise InvalidArgument("p must lie in (1, 2]")
        if not 0 < lam < 1:
            raise InvalidArgument("lambda must lie in (0, 1)")
        if N < 1:
            raise InvalidArgument("N must be >= 1")
        r0 = np.asarray(r0)
        mask = r0 if r0.dtype == bool else np.isin(np.arange(len(mu)), r0)
        self.mu, self.p, self.lam, self.N = mu, float(p), float(lam), int(N)
        self.ids = np.flatnonzero(mask)
        if len(self.ids) == 0:
            raise EmptyDomain("R0 holds no atoms")
        self.mask = mask
        w = mu.weights
        balls = [b1.scaled(2.0 ** k) for k in range(N + 1)]
        self.member = np.array([_atom_mask(mu, bb) for bb in balls], dtype=float)
        self.mu_balls = self.member @ w
        if self.mu_balls[0] <= 0:
            raise EmptyDomain("B1 carries no mass")
        self.sigma_p = (self.mu_balls[0] / b1.radius ** mu.n) ** p * self.mu_balls[0]
        self.theta_b1 = self.mu_balls[0] / b1.radius ** mu.n
        if c is None:
            field0 = riesz_field(mu, mu.points[self.ids])
            wr = w[self.ids]
            c = (wr[:, None] * field0).sum(axis=0) / wr.sum()
        self.c = np.asarray(c, dtype=float)

    def nu(self, a):
        nu = self.mu.weights.copy()
        nu[self.ids] *= a
        return nu

    def _field(self, nu):
        return riesz_field(self.mu, self.mu.points[self.ids], charges=nu)

    def value(self, a, smooth_T=None, parts=False):
        p, lam = self.p, self.lam
        nu = self.nu(a)
        V = self._field(nu) - self.c
        mod = np.sqrt(np.einsum("ij,ij->i", V, V))
        t1 = float(np.sum(nu[self.ids] * mod ** p))
        nb = self.member @ nu
        if np.any(nb[:1] <= 0):
            return np.inf
        with np.errstate(divide="ignore"):
            ratios = np.where(nb > 0, self.mu_balls / nb, np.inf)
        amax = _smooth_max(a, smooth_T) if smooth_T else float(np.max(a))
        penalty = amax ** p + ratios[0] + ratios[1:].sum() / self.N
        F = t1 + lam * self.sigma_p * penalty
        if parts:
            return F, {"oscillation": t1, "max_term": amax ** p, "b1_term": float(ratios[0]),
                       "scales_term": float(ratios[1:].sum() / self.N)}
        return F

    def stationarity_terms(self, a):
        """|R nu - c|^p + p R*_nu(chi_R0 |R nu - c|^(p-2)(R nu - c)) at the R0 atoms."""
        p = self.p
        nu = self.nu(a)
        V = self._field(nu) - self.c
        mod = np.sqrt(np.einsum("ij,ij->i", V, V))
        with np.errstate(divide="ignore", invalid="ignore"):
            G = np.where(mod[:, None] > 0, mod[:, None] ** (p - 2) * V, 0.0)
        pts = self.mu.points[self.ids]
        adj = -kernels.riesz_dot(pts, pts, nu[self.ids], G, self.mu.n)
        return mod ** p, adj

    def gradient(self, a, smooth_T):
        p, lam = self.p, self.lam
        nu = self.nu(a)
        w = self.mu.weights[self.ids]
        mod_p, adj = self.stationarity_terms(a)
        g = w * (mod_p + p * adj)
        nb = self.member @ nu
        coef = self.mu_balls / nb ** 2
        coef[1:] /= self.N
        g -= lam * self.sigma_p * w * (coef @ self.member[:, self.ids])
        s = _smooth_max(a, smooth_T)
        z = np.exp((a - a.max()) / smooth_T)
        g += lam * self.sigma_p * p * s ** (p - 1) * z / z.sum()
        return g


def _smooth_max(a, T):
    m = float(np.max(a))
    return m + T * float(np.log(np.sum(np.exp((a - m) / T))))


def variational_minimize(mu, r0, b1, N, p=2.0, lam=0.5, b0=None, max_iter=400,
                         T0=0.25, T_min=1e-5, T_decay=0.9, tol=1e-12, c=None):
    """Projected gradient descent on [0, 4]^{#R0} from a = 1.

    The max term is smoothed by log-sum-exp with a shrinking temperature for the
    gradient only; steps are accepted on the true functional, so F never increases.
    """
    prob = VariationalProblem(mu, r0, b1, N, p, lam, c)
    a = np.ones(len(prob.ids))
    F = prob.value(a)
    F1 = F
    hist = [F]
    T = T0
    step = None
    failed = False
    it = 0
    stall = 0
    for it in range(1, max_iter + 1):
        g = prob.gradient(a, T)
        if step is None:
            step = 0.5 / max(float(np.max(np.abs(g))), 1e-300)
        s = step
        accepted = False
        for _ in range(50):
            a_new = np.clip(a - s * g, 0.0, 4.0)
            if np.array_equal(a_new, a):
                break
            F_new = prob.value(a_new)
            if F_new < F:
                accepted = True
                break
            s *= 0.5
        if accepted:
            rel = (F - F_new) / max(abs(F), 1e-300)
            a, F = a_new, F_new
            hist.append(F)
            step = 2.0 * s
            stall = stall + 1 if rel < tol else 0
            if stall >= 5:
                break
        else:
            if T <= T_min:
                failed = bool(np.linalg.norm(np.clip(a - g, 0, 4) - a) > 1e-6 * max(1.0, np.linalg.norm(a)))
                break
            step = None
        T = max(T * T_decay, T_min)
        if not accepted:
            T = max(T * 0.5, T_min)
    nu = prob.nu(a)
    st = VariationalState(a=a, p=prob.p, lam=prob.lam, c_R0=prob.c, F=F, F1=F1, sigma_p=prob.sigma_p,
                          history=hist, nu_b1=float(prob.member[0] @ nu), mu_b1=float(prob.mu_balls[0]),
                          line_search_failed=failed, iterations=it)
    if b0 is not None:
        mod_p, adj = prob.stationarity_terms(a)
        lhs = mod_p + prob.p * adj
        rhs = 16.0 * prob.lam * prob.theta_b1 ** prob.p
        sel = b0.scaled(1.25).contains(mu.points[prob.ids]) & (nu[prob.ids] > 0)
        if np.any(sel):
            st.residual_max = float(np.max(lhs[sel] - rhs))
            st.residual_fraction = float(np.mean(lhs[sel] <= rhs))
        st.residual_rhs = float(rhs)
    return st
