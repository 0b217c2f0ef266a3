import numpy as np
import pytest

from gdmc import oracle
from tests.conftest import small_instance


def test_jacobi_on_diagonal_matrix():
    d = np.diag([3.0, -1.0, 7.0, 0.5])
    ev, v = oracle.jacobi_eigen(d)
    np.testing.assert_allclose(ev, [7.0, 3.0, 0.5, -1.0], atol=0)
    # eigenvector columns are signed unit coordinate vectors
    assert np.max(np.abs(np.abs(v) - np.abs(v).round())) <= 1e-12


def test_jacobi_on_rank1_planted_matrix():
    gt, _ = small_instance(n=32, seed=1)
    m = oracle.dense_mstar(gt)
    ev, _ = oracle.jacobi_eigen(m)
    assert abs(ev[0] - gt.lam) <= 1e-10
    assert np.max(np.abs(ev[1:])) <= 1e-10


def test_jacobi_reconstruction_and_residual(rng):
    a = rng.standard_normal((16, 16))
    a = 0.5 * (a + a.T)
    ev, v = oracle.jacobi_eigen(a)
    np.testing.assert_allclose(v @ np.diag(ev) @ v.T, a, rtol=0, atol=1e-8)
    off = v.T @ a @ v - np.diag(ev)
    assert np.linalg.norm(off) <= 1e-8 * np.linalg.norm(a)
    assert np.all(np.diff(ev) <= 1e-12)


def test_jacobi_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        oracle.jacobi_eigen(rng.standard_normal((8, 8)))
    with pytest.raises(ValueError):
        oracle.jacobi_eigen(np.eye(oracle.EIGEN_MAX_N + 1))


def test_fd_gradient_on_known_quadratic(rng):
    x = rng.standard_normal(12)
    fd = oracle.fd_gradient(lambda v: float(v @ v), x, h=1e-6)
    np.testing.assert_allclose(fd, 2 * x, rtol=1e-8, atol=1e-9)


def test_fd_gradient_vanishes_at_origin():
    from gdmc import loss

    _, obs = small_instance(n=16, p=0.5, sigma=0.0, seed=2)
    fd = oracle.fd_gradient(lambda v: loss(obs, v), np.zeros(16))
    assert np.max(np.abs(fd)) <= 1e-6


def test_dense_apply_two_loop_orders_agree(rng):
    a = rng.standard_normal((20, 20))
    x = rng.standard_normal(20)
    np.testing.assert_allclose(
        oracle.dense_apply(a, x, order="ij"),
        oracle.dense_apply(a, x, order="ji"),
        rtol=0,
        atol=1e-12,
    )
    with pytest.raises(ValueError):
        oracle.dense_apply(a, x, order="jk")


def test_dense_pomega_definitions():
    gt, obs = small_instance(n=12, p=0.5, sigma=0.0, seed=3)
    a = np.arange(144, dtype=float).reshape(12, 12)
    a = 0.5 * (a + a.T)
    pom = oracle.dense_pomega(obs.mask, 0.5, a)
    d = oracle.dense_mask_matrix(obs.mask)
    np.testing.assert_allclose(pom, d * a / 0.5, atol=0)
    loo = oracle.dense_loo_pomega(obs.mask, 0.5, a, 4)
    np.testing.assert_allclose(loo[4, :], a[4, :], atol=0)
    np.testing.assert_allclose(loo[:, 4], a[:, 4], atol=0)
    mask_off = np.ones((12, 12), dtype=bool)
    mask_off[4, :] = False
    mask_off[:, 4] = False
    np.testing.assert_allclose(loo[mask_off], pom[mask_off], atol=0)


def test_dense_threshold_enforced():
    class FakeMask:
        n = oracle.DENSE_MAX_N + 1

    with pytest.raises(ValueError):
        oracle.dense_mask_matrix(FakeMask())


def test_random_orthogonal_is_orthogonal():
    q = oracle.random_orthogonal(4, seed=3)
    np.testing.assert_allclose(q.T @ q, np.eye(4), rtol=0, atol=1e-12)
