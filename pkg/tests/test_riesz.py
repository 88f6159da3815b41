import numpy as np
import pytest

from gmtkit.errors import EmptyDomain, InvalidArgument
from gmtkit.generators import circle, corner_cantor, segment
from gmtkit.measure import Ball, PointMeasure, m_n
from gmtkit.riesz import (PV, KernelConfig, _restricted_matrix, bump, operator_norm_estimate,
                          oscillation_l2, riesz_adjoint_apply, riesz_apply, riesz_at, riesz_field,
                          riesz_pv, riesz_star, riesz_star_smooth, treecode_riesz)


def direct(points, weights, x, n, eps=0.0):
    """Plain loop oracle for the hard-truncated sum."""
    out = np.zeros(len(x))
    for p, w in zip(points, weights):
        z = x - p
        r = np.linalg.norm(z)
        if r > eps and r > 0:
            out += w * z / r ** (n + 1)
    return out


def pair():
    return PointMeasure([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0])


def test_truncated_examples():
    mu = pair()
    assert np.allclose(riesz_at(mu, [0.0, 0.0], KernelConfig(0.5)), [-1.0, 0.0], atol=1e-15)
    assert np.allclose(riesz_at(mu, [0.0, 0.0], KernelConfig(1.5)), [0.0, 0.0])
    sym = PointMeasure([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    assert np.allclose(riesz_at(sym, [0.0, 0.0]), 0.0, atol=1e-15)


def test_pv_examples():
    assert np.array_equal(riesz_pv(PointMeasure([[0.3, 0.2]], [1.0]), 0), [0.0, 0.0])
    mu = PointMeasure([[1.0, 0.0], [-1.0, 0.0]], [0.5, 0.5])
    assert np.allclose(riesz_pv(mu, 0), [0.25, 0.0], rtol=1e-15)


def test_pv_polygon_matches_direct_and_symmetry():
    k = 6
    mu = circle(2 * k, radius=1.0, center=(0.0, 0.0), mass=1.0)
    for i in range(2 * k):
        want = direct(np.delete(mu.points, i, 0), np.delete(mu.weights, i), mu.points[i], 1)
        got = riesz_pv(mu, i)
        assert np.allclose(got, want, rtol=1e-13, atol=1e-14)
        # reflection through the vertex leaves only the radial component
        radial = mu.points[i] / np.linalg.norm(mu.points[i])
        tangential = got - np.dot(got, radial) * radial
        assert np.linalg.norm(tangential) < 1e-12


def test_point_reflection_symmetry_gives_zero():
    rng = np.random.default_rng(3)
    half = rng.normal(size=(40, 2))
    pts = np.vstack([half, -half])
    w = np.concatenate([rng.uniform(0.5, 1, 40)] * 2)
    mu = PointMeasure(pts, w)
    assert np.linalg.norm(riesz_at(mu, [0.0, 0.0])) < 1e-12


def test_field_matches_loop_oracle():
    rng = np.random.default_rng(11)
    mu = PointMeasure(rng.random((50, 3)), rng.uniform(0.2, 1.0, 50))
    for eps in (0.0, 0.2):
        field = riesz_field(mu, cfg=KernelConfig(eps))
        for i in (0, 17, 49):
            assert np.allclose(field[i], direct(mu.points, mu.weights, mu.points[i], 2, eps), rtol=1e-12)


def test_bump_profile():
    t = np.linspace(0, 3, 3001)
    phi = bump(t)
    assert np.all(phi[t <= 1] == 0) and np.all(phi[t >= 2] == 1)
    assert np.all(np.diff(phi) >= 0) and phi.min() >= 0 and phi.max() <= 1


def test_smooth_vs_hard_bounded_by_maximal_function():
    mu = corner_cantor(4)
    rng = np.random.default_rng(0)
    worst = 0.0
    for x in rng.random((30, 2)):
        for eps in (0.01, 0.05, 0.2):
            diff = np.linalg.norm(riesz_at(mu, x, KernelConfig(eps)) - riesz_at(mu, x, KernelConfig(eps, True)))
            mx = m_n(mu, x, (mu.h, 4.0))
            if mx > 0:
                worst = max(worst, diff / mx)
    assert worst <= 2.0 ** mu.n * 2


def test_riesz_star_examples():
    mu = PointMeasure([[3.0, 0.0]], [2.0])
    assert riesz_star(mu, [0.0, 0.0]) == pytest.approx(2.0 / 3.0)
    two = PointMeasure([[1.0, 0.0], [-2.0, 0.0]], [1.0, 3.0])
    # eps in [1, 2) keeps only the far atom: 3 * 2/4 = 3/2; below 1 both: |-1 + 3/2| = 1/2
    assert riesz_star(two, [0.0, 0.0]) == pytest.approx(1.5)
    assert riesz_star(two, [0.0, 0.0], eps_list=[0.2, 0.9]) == pytest.approx(0.5)
    sym = PointMeasure([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    assert riesz_star(sym, [0.0, 0.0]) == 0.0


def test_riesz_star_piecewise_constant_enumeration():
    rng = np.random.default_rng(4)
    mu = PointMeasure(rng.random((25, 2)), rng.uniform(0.5, 1.0, 25))
    x = np.array([0.45, 0.55])
    dist = np.sort(np.linalg.norm(mu.points - x, axis=1))
    # sample eps inside every gap between atom distances
    eps = np.concatenate([[dist[0] / 2], (dist[1:] + dist[:-1]) / 2])
    brute = max(np.linalg.norm(direct(mu.points, mu.weights, x, 1, e)) for e in eps)
    assert riesz_star(mu, x) == pytest.approx(brute, rel=1e-13)
    assert riesz_star(mu, x) >= np.linalg.norm(riesz_at(mu, x)) - 1e-14
    assert riesz_star_smooth(mu, x) <= riesz_star(mu, x) * 10
    with pytest.raises(InvalidArgument):
        riesz_star(mu, x, eps_list=[])


def test_oscillation_examples():
    mu = PointMeasure([[0.0, 0.0], [0.1, 0.0]], [0.5, 0.5])
    b = Ball([0.0, 0.0], 1.0)
    assert oscillation_l2(mu, b, np.ones((2, 2))) == 0.0
    assert oscillation_l2(mu, b, np.array([[0.0, 0.0], [2.0, 0.0]])) == pytest.approx(1.0)
    with pytest.raises(EmptyDomain):
        oscillation_l2(mu, Ball([5.0, 5.0], 0.1), np.zeros((2, 2)))


def test_adjoint_identity():
    rng = np.random.default_rng(9)
    mu = PointMeasure(rng.random((120, 2)), rng.uniform(0.1, 1.0, 120))
    f = rng.normal(size=120)
    g = rng.normal(size=(120, 2))
    lhs = np.sum(mu.weights * np.einsum("ij,ij->i", riesz_apply(mu, f), g))
    rhs = np.sum(mu.weights * f * riesz_adjoint_apply(mu, g))
    assert lhs == pytest.approx(rhs, rel=1e-10)
    assert np.array_equal(riesz_adjoint_apply(mu, np.zeros((120, 2))), np.zeros(120))


def test_adjoint_three_atoms_hand_expansion():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    w = np.array([1.0, 2.0, 3.0])
    mu = PointMeasure(pts, w)
    g = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    # K(x0-x1) = (-1,0); K(x0-x2) = (0,-2)/4; K(x1-x0) = (1,0); K(x1-x2) = (1,-2)/5^(1)...
    K = lambda z: z / np.dot(z, z)
    want = np.array([-sum(w[j] * K(pts[i] - pts[j]) @ g[j] for j in range(3) if j != i) for i in range(3)])
    assert np.allclose(riesz_adjoint_apply(mu, g), want, rtol=1e-14)
    # spot value at atom 0: -(2 * (-1,0).(0,1) + 3 * (0,-0.5).(1,1)) = 1.5
    assert riesz_adjoint_apply(mu, g)[0] == pytest.approx(1.5)


def test_operator_norm_two_atoms_closed_form():
    # restricted operator on two atoms: the only nonzero blocks are +-sqrt(w0 w1) K(x0-x1)
    w0, w1, r = 0.7, 0.3, 0.5
    mu = PointMeasure([[0.0, 0.0], [r, 0.0]], [w0, w1])
    est = operator_norm_estimate(mu, Ball([0.0, 0.0], 1.0))
    assert est.converged
    assert est.value == pytest.approx(np.sqrt(w0 * w1) / r, rel=1e-6)


def test_operator_norm_homogeneity_and_interlacing():
    rng = np.random.default_rng(21)
    pts, w = rng.random((60, 2)), rng.uniform(0.2, 1.0, 60)
    mu = PointMeasure(pts, w)
    big = Ball([0.5, 0.5], 1.0)
    est = operator_norm_estimate(mu, big, iterations=5000, tol=1e-10)
    svd = np.linalg.svd(_restricted_matrix(mu, mu.ids_in(big)), compute_uv=False)[0]
    assert est.value == pytest.approx(svd, rel=1e-4)
    doubled = operator_norm_estimate(PointMeasure(pts, 2 * w), big, iterations=5000, tol=1e-10)
    assert doubled.value == pytest.approx(2 * est.value, rel=1e-4)
    small = Ball([0.5, 0.5], 0.3)
    sub = np.linalg.svd(_restricted_matrix(mu, mu.ids_in(small)), compute_uv=False)[0]
    assert sub <= svd + 1e-6
    with pytest.raises(EmptyDomain):
        operator_norm_estimate(mu, Ball([5, 5], 0.1))


def test_treecode_angle_zero_is_direct():
    mu = corner_cantor(5)
    targets = mu.points[::7]
    for cfg in (PV, KernelConfig(0.01), KernelConfig(0.01, True)):
        got = treecode_riesz(mu, targets, cfg, opening_angle=0.0)
        assert np.allclose(got, riesz_field(mu, targets, cfg), rtol=1e-12, atol=1e-12)
    with pytest.raises(InvalidArgument):
        treecode_riesz(mu, targets, PV, opening_angle=1.0)


def test_treecode_error_shrinks_with_angle():
    mu = segment(3000)
    mu = PointMeasure(mu.points, mu.weights * np.linspace(1, 2, len(mu)), mu.h)
    targets = mu.points[::11]
    ref = riesz_field(mu, targets)
    scale = np.linalg.norm(ref, axis=1).max()
    angles = (0.7, 0.5, 0.2, 0.05)
    errs = [np.abs(treecode_riesz(mu, targets, PV, a) - ref).max() / scale for a in angles]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    # monopole truncation: error decays roughly like angle^2
    assert errs[-1] < 1e-3


def test_treecode_symmetric_center():
    mu = circle(400, radius=1.0, center=(0.0, 0.0), mass=1.0)
    val = treecode_riesz(mu, np.zeros((1, 2)), PV, 0.5)[0]
    assert np.linalg.norm(val) <= 1e-3
