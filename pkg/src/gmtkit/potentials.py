"""Energies, capacity lower bounds and the ball-shrinking dimension scan."""
from dataclasses import dataclass, field
from math import gamma, log, pi

import numpy as np

from .errors import InvalidArgument
from .measure import Ball, _max_density_sorted, is_p_doubling, p_mu, radial_profile, theta


def sphere_area(n):
    """Surface area of the unit sphere in R^(n+1)."""
    return 2.0 * pi ** ((n + 1) / 2.0) / gamma((n + 1) / 2.0)


def newton_constant(n):
    """c_n with c_n |x|^(1-n) the fundamental solution of -Laplace in R^(n+1), n >= 2."""
    if n < 2:
        raise InvalidArgument("the Newtonian kernel needs n >= 2")
    return 1.0 / ((n - 1) * sphere_area(n))


@dataclass
class EnergyReport:
    energy: float
    kernel: str
    c_n: float
    smear: float
    off_diagonal: float
    self_energy: float


def kernel_values(r, n, c_n):
    if n == 1:
        return np.log(1.0 / r) / (2.0 * pi)
    return c_n * r ** (1.0 - n)


def ball_self_energy(s, n, c_n):
    """Energy of the uniform probability measure on a ball of radius s in R^(n+1)."""
    d = n + 1
    if n == 1:
        return (-log(s) + 0.25) / (2.0 * pi)
    return c_n * 2.0 * d / ((d + 2.0) * s ** (d - 2))


def riesz_energy(mu, smear=None, c_n=None, block=512):
    """Double sum of the fundamental solution; atoms self-interact as uniform balls of radius smear."""
    n = mu.n
    smear = mu.h if smear is None else float(smear)
    if not smear > 0:
        raise InvalidArgument("smear radius must be positive")
    if n >= 2 and c_n is None:
        c_n = newton_constant(n)
    c_n = 0.0 if c_n is None else float(c_n)
    pts, w = mu.points, mu.weights
    self_e = ball_self_energy(smear, n, c_n)
    off = 0.0
    coincident = 0.0
    for a in range(0, len(pts), block):
        y = pts[a:a + block, None, :] - pts[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", y, y))
        ww = w[a:a + block, None] * w[None, :]
        pos = r > 0
        vals = np.zeros_like(r)
        vals[pos] = kernel_values(r[pos], n, c_n)
        off += float(np.sum(ww * vals))
        # distinct atoms at the same spot interact like the smeared self term
        zero = ~pos
        zero[np.arange(r.shape[0]), np.arange(a, a + r.shape[0])] = False
        coincident += float(np.sum(ww[zero]))
    self_total = float(np.sum(w * w)) * self_e + coincident * self_e
    return EnergyReport(off + self_total, "log" if n == 1 else "newtonian", c_n, smear, off, self_total)


@dataclass
class CapacityBound:
    value: float
    energy: float
    kernel: str
    scale_warning: bool = False


def capacity_lower_bound(mu, smear=None, c_n=None):
    """Cap >= 1/I(candidate) (Newtonian); Cap_L = exp(-2 pi I) in the plane."""
    m = mu.total_mass
    cand = mu.with_weights(mu.weights / m)
    rep = riesz_energy(cand, smear, c_n)
    if mu.n == 1:
        return CapacityBound(float(np.exp(-2.0 * pi * rep.energy)), rep.energy, "log", rep.energy <= 0)
    if rep.energy <= 0:
        return CapacityBound(float("inf"), rep.energy, rep.kernel, True)
    return CapacityBound(1.0 / rep.energy, rep.energy, rep.kernel)


# ---------------------------------------------------------------- dimension scan

@dataclass
class DimScanStep:
    radius: float
    option: str           # "i", "ii" or "good"
    p_value: float
    ratio: float          # P(B_{k+1}) / P(B_k)
    lemma_ok: bool = True


@dataclass
class DimScanResult:
    center: np.ndarray
    m: int
    alpha: float
    steps: list
    radii: list
    p_values: list
    witness: dict | None
    beta_theory: float
    exponent_theory: float | None
    beta_measured: float | None
    exponent_measured: float | None
    exponent_empirical: float | None
    sandwich_ok: bool
    label: str = "scan exponent"
    extras: dict = field(default_factory=dict)


def _window_max_density(mu, x, rmin, rmax):
    dist, cum = radial_profile(mu, x, rmax)
    return _max_density_sorted(dist, cum, mu.n, rmin, rmax)


def dimension_scan(mu, start, m=3, alpha=None, max_steps=200):
    """Shrink balls about a fixed center following the (i)/(ii) dichotomy.

    At B_k, with B = B_k/2: if B is not (P, 4)-doubling, B_{k+1} = B_k/2 (option i);
    if it is doubling and no concentric ball with radius in [d1^(2n+2), d1] rad(B)
    has Theta >= alpha Theta(B), B_{k+1} = 2^(-(2n+2)m-1) B_k (option ii);
    otherwise B is returned as a good-ball witness.  d1 = 2^-m.
    """
    if m < 3:
        raise InvalidArgument("m must be >= 3")
    n = mu.n
    alpha = 2.0 ** (-(n + 3)) if alpha is None else float(alpha)
    d1 = 2.0 ** (-m)
    jump = 2.0 ** (-(2 * n + 2) * m - 1)
    x = np.asarray(start.center, dtype=float)
    B = start
    steps, radii, pvals = [], [start.radius], [p_mu(mu, start)]
    witness = None
    for _ in range(max_steps):
        half = B.scaled(0.5)
        if half.radius < mu.h:
            break
        if not is_p_doubling(mu, half, 4.0):
            nxt = half
            option = "i"
            lemma_ok = p_mu(mu, half.scaled(2.0)) > 1.5 * p_mu(mu, half) * (1 - 1e-10)
        else:
            lo, hi = d1 ** (2 * n + 2) * half.radius, d1 * half.radius
            th_half = theta(mu, half)
            # the window is clipped at the resolution floor
            dense = hi >= mu.h and _window_max_density(mu, x, max(lo, mu.h), hi) >= alpha * th_half
            if dense:
                witness = {"radius": half.radius, "theta": th_half, "window": [lo, hi]}
                steps.append(DimScanStep(half.radius, "good", p_mu(mu, half), float("nan")))
                break
            nxt = B.scaled(jump)
            option = "ii"
            lemma_ok = True
        if nxt.radius < mu.h:
            break
        pn = p_mu(mu, nxt)
        steps.append(DimScanStep(nxt.radius, option, pn, pn / pvals[-1], lemma_ok))
        radii.append(nxt.radius)
        pvals.append(pn)
        B = nxt
    sandwich = all(jump * radii[k] * (1 - 1e-12) <= radii[k + 1] <= 0.5 * radii[k] * (1 + 1e-12)
                   for k in range(len(radii) - 1))
    beta_th = ((2 * n + 2) * m - 1) * log(2.0) / log(4.0 / 3.0)
    exp_th = exp_meas = beta_meas = exp_emp = None
    if witness is None and len(radii) >= 2:
        exp_th = n + 1.0 / beta_th
        K = len(radii) - 1
        # radii fall like (3/4)^(k beta): beta from the first and last radius
        beta_meas = log(radii[0] / radii[-1]) / (K * log(4.0 / 3.0))
        exp_meas = n + 1.0 / beta_meas
        exp_emp = n + log(pvals[-1] / pvals[0]) / log(radii[-1] / radii[0])
    return DimScanResult(x, m, alpha, steps, radii, pvals, witness, beta_th, exp_th,
                         beta_meas, exp_meas, exp_emp, bool(sandwich))
