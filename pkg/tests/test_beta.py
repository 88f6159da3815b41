import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmtkit.beta import (beta2, beta_p, jones_wolff, log_grid, plane_objective,
                         square_function_lhs)
from gmtkit.errors import InvalidArgument
from gmtkit.generators import corner_cantor, lipschitz_graph, segment
from gmtkit.measure import Ball, PointMeasure, mass_in_ball, theta


def grid_min(pts, w, r, n, p, step):
    """Brute force over line directions; the best offset is a weighted mean (p=2) or median (p=1)."""
    ang = np.arange(0.0, np.pi, step)
    normals = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    proj = pts @ normals.T
    if p == 2:
        off = (w @ proj) / w.sum()
        cost = w @ (proj - off) ** 2
    else:
        order = np.argsort(proj, axis=0)
        sp = np.take_along_axis(proj, order, axis=0)
        cw = np.cumsum(w[order], axis=0)
        k = np.argmax(cw >= 0.5 * w.sum(), axis=0)
        off = sp[k, np.arange(len(ang))]
        cost = w @ np.abs(proj - off)
    return float(cost.min() / r ** (n + p))


def test_collinear_zero():
    mu = segment(50)
    b = Ball([0.5, 0.0], 0.3)
    assert beta2(mu, b).beta == pytest.approx(0.0, abs=1e-12)
    assert beta_p(mu, b, 1).beta == pytest.approx(0.0, abs=1e-12)


def test_four_atom_example():
    mu = PointMeasure([[0.5, 0.1], [0.5, -0.1], [-0.5, 0.1], [-0.5, -0.1]], [0.25] * 4)
    fit = beta2(mu, Ball([0.0, 0.0], 1.0))
    assert fit.beta == pytest.approx(0.1, rel=1e-12)
    assert abs(fit.normal[1]) == pytest.approx(1.0)
    assert grid_min(mu.points, mu.weights, 1.0, 1, 2, 1e-4) == pytest.approx(0.01, rel=1e-6)


def test_empty_ball_flag():
    fit = beta2(segment(10), Ball([5.0, 5.0], 0.1))
    assert fit.empty and fit.beta == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_beta2_matches_angle_grid(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(40, 2)) * [0.4, 0.1]
    w = rng.uniform(0.1, 1.0, 40)
    mu = PointMeasure(pts, w)
    b = Ball([0.0, 0.0], 2.0)
    ids = mu.ids_in(b)
    want = grid_min(mu.points[ids], mu.weights[ids], 2.0, 1, 2, 1e-5)
    assert beta2(mu, b).objective == pytest.approx(want, rel=1e-6)
    # never worse than the horizontal line through the center
    flat = plane_objective(mu.points[ids], mu.weights[ids], np.zeros(2), np.array([0.0, 1.0]), 2.0, 1, 2)
    assert beta2(mu, b).objective <= flat + 1e-15


def test_beta1_grid_oracle():
    rng = np.random.default_rng(17)
    pts = rng.random((20, 2)) * [1.0, 0.3]
    w = rng.uniform(0.2, 1.0, 20)
    mu = PointMeasure(pts, w)
    b = Ball([0.5, 0.15], 1.0)
    fit = beta_p(mu, b, 1)
    want = grid_min(pts, w, 1.0, 1, 1, 1e-4)
    assert fit.objective == pytest.approx(want, abs=1e-4)
    assert fit.objective <= want + 1e-12
    l2 = beta2(mu, b)
    assert fit.objective <= plane_objective(pts, w, l2.base, l2.normal, 1.0, 1, 1) + 1e-14
    assert np.linalg.norm(fit.normal) == pytest.approx(1.0)


def test_beta_p_rejects_other_p():
    with pytest.raises(InvalidArgument):
        beta_p(segment(10), Ball([0.5, 0.0], 0.2), 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_beta2_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    mu = PointMeasure(rng.random((30, 2)), rng.uniform(0.1, 1.0, 30))
    ang = rng.random() * 2 * np.pi
    R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    shift = rng.normal(size=2)
    c, r = rng.random(2), rng.uniform(0.2, 0.8)
    a = beta2(mu, Ball(c, r)).beta
    b = beta2(mu.transformed(rotation=R, shift=shift), Ball(R @ c + shift, r)).beta
    assert b == pytest.approx(a, rel=1e-9, abs=1e-7)


def test_log_grid_quadrature():
    mids, widths = log_grid(0.013, 1.7)
    assert widths.sum() == pytest.approx(np.log(1.7 / 0.013), rel=1e-14)
    assert np.all(widths > 0) and np.all(widths <= 0.5 * np.log(2) + 1e-15)
    with pytest.raises(InvalidArgument):
        log_grid(1.0, 0.5)


def test_jones_wolff_line_is_zero():
    mu = segment(2000)
    assert jones_wolff(mu, mu.points[1000], mu.h, 0.4) == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(InvalidArgument):
        jones_wolff(mu, mu.points[0], mu.h / 2, 0.4)


def test_jones_wolff_single_scale_step():
    # a rectangle of atoms seen from far away: only radii that reach it contribute
    mu = PointMeasure([[0.0, 0.0], [1.0, 0.1], [1.0, -0.1]], [1e-12, 0.5, 0.5], h=1e-3)
    x = np.zeros(2)
    # for r in [1.005, inf) the ball holds all three atoms and beta_2^2 Theta is an explicit function
    j2 = jones_wolff(mu, x, 1.1, 2.2) ** 2
    rs = np.exp(np.linspace(np.log(1.1), np.log(2.2), 20001))
    prof = [beta2(mu, Ball(x, r)).objective * theta(mu, Ball(x, r)) for r in rs]
    exact = np.trapezoid(prof, np.log(rs))
    assert j2 == pytest.approx(exact, rel=0.05)


def test_jones_wolff_cantor_generation_increments():
    mu = corner_cantor(7)
    for x in (mu.points[0], mu.points[1234]):
        j2 = [jones_wolff(mu, x, 4.0 ** -j, 2.0) ** 2 for j in range(1, 7)]
        inc = np.diff(j2)
        assert np.all(inc >= 0.5 * inc[0]) and np.all(inc <= 2.0 * inc[0])


def test_square_function_line_small():
    mu = segment(20000, length=40.0, mass=40.0, start=-20.0)
    b0 = Ball([0.0, 0.0], 1.0)
    val = square_function_lhs(mu, b0)
    norm = theta(mu, b0) ** 2 * 2.0
    assert val < 1e-3 * norm


def test_square_function_scaling_covariance():
    mu = lipschitz_graph(1500, amplitude=0.1)
    b0 = Ball([0.5, 0.0], 0.25)
    lam = 3.7
    big = PointMeasure(mu.points * lam, mu.weights * lam ** mu.n, mu.h * lam)
    b1 = Ball(b0.center * lam, b0.radius * lam)

    def ratio(m, b):
        return square_function_lhs(m, b) / (theta(m, b) ** 2 * mass_in_ball(m, b))

    assert ratio(big, b1) == pytest.approx(ratio(mu, b0), rel=1e-10)


def test_square_function_monotone_in_rmax():
    mu = corner_cantor(4)
    b0 = Ball([0.5, 0.5], 0.5)
    vals = [square_function_lhs(mu, b0, r_max=r) for r in (0.25, 0.5, 1.0, 2.0)]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))


def test_square_function_cantor_linear_growth():
    b0 = Ball([0.5, 0.5], np.sqrt(0.5))
    vals = [square_function_lhs(corner_cantor(g), b0) for g in (3, 4, 5, 6)]
    d = np.diff(vals)
    assert np.all(d > 0)
    assert np.all((d[1:] / d[:-1] >= 0.5) & (d[1:] / d[:-1] <= 2.0))
