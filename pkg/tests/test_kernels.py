import numpy as np
import pytest

from gmtkit import kernels
from gmtkit.spatial import neighbor_csr
from gmtkit.treecode import build_tree

BACKENDS = ["python"] + (["cython"] if kernels._compiled is not None else [])


@pytest.fixture
def cloud():
    rng = np.random.default_rng(7)
    src = rng.random((700, 3))
    tgt = np.vstack([src[:50], rng.random((80, 3))])
    q = rng.uniform(0.1, 1.0, len(src))
    return tgt, src, q


@pytest.mark.parametrize("eps,smooth", [(0.0, False), (0.05, False), (0.05, True)])
def test_backends_agree_riesz_sum(cloud, eps, smooth):
    tgt, src, q = cloud
    outs = [kernels.riesz_sum(tgt, src, q, 2, eps, smooth, backend=b) for b in BACKENDS]
    for o in outs[1:]:
        assert np.allclose(o, outs[0], rtol=1e-12, atol=1e-12)


def test_backends_agree_riesz_dot(cloud):
    tgt, src, q = cloud
    vec = np.random.default_rng(2).normal(size=src.shape)
    outs = [kernels.riesz_dot(tgt, src, q, vec, 2, backend=b) for b in BACKENDS]
    for o in outs[1:]:
        assert np.allclose(o, outs[0], rtol=1e-12, atol=1e-12)


def test_backends_agree_tree_eval(cloud):
    tgt, src, q = cloud
    tree = build_tree(src, q, leaf_size=8)
    outs = [kernels.tree_eval(tree, tgt, 0.5, 2, backend=b) for b in BACKENDS]
    for o in outs[1:]:
        assert np.allclose(o, outs[0], rtol=1e-12, atol=1e-12)


def test_backends_agree_ball_moments(cloud):
    _, src, q = cloud
    centers = src[:40]
    radii = np.array([0.05, 0.1, 0.2])
    indptr, indices = neighbor_csr(src, centers, radii[-1])
    outs = [kernels.ball_moments(src, q, centers, radii, indptr, indices, backend=b) for b in BACKENDS]
    for o in outs[1:]:
        for a, b in zip(o, outs[0]):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
    mass = outs[0][0]
    for c in range(5):
        for k, r in enumerate(radii):
            inside = np.linalg.norm(src - centers[c], axis=1) <= r
            assert mass[c, k] == pytest.approx(q[inside].sum(), rel=1e-13)


def test_thread_count_does_not_change_bits(cloud):
    tgt, src, q = cloud
    big_t = np.vstack([tgt] * 5)
    old = kernels.get_threads()
    try:
        res = []
        for t in (1, 4, 8):
            kernels.set_threads(t)
            res.append(kernels.riesz_sum(big_t, src, q, 2))
    finally:
        kernels.set_threads(old)
    assert all(np.array_equal(res[0], r) for r in res[1:])


def test_direct_sum_formula():
    tgt = np.array([[0.0, 0.0]])
    src = np.array([[1.0, 0.0], [0.0, 2.0]])
    q = np.array([1.0, 2.0])
    got = kernels.riesz_sum(tgt, src, q, 1)[0]
    want = 1.0 * np.array([-1.0, 0.0]) / 1.0 + 2.0 * np.array([0.0, -2.0]) / 4.0
    assert np.allclose(got, want, rtol=1e-15)


def test_backend_name_recorded():
    assert kernels.BACKEND in ("cython", "python")
