import json

import numpy as np
import pytest

from gdmc import GroundTruth, generate_ground_truth, incoherence
from gdmc.ground_truth import from_eigenvectors, orthonormalize


def test_rank1_model_basics():
    gt = generate_ground_truth(200, [1.0], seed=3)
    assert gt.r == 1
    assert abs(gt.x_star @ gt.x_star - gt.lam) <= 1e-12
    assert abs(np.max(np.abs(gt.u)) - np.sqrt(gt.mu / gt.n)) <= 1e-14
    # sign convention: largest-magnitude entry positive
    assert gt.u[np.argmax(np.abs(gt.u))] > 0


def test_orthonormality_dense_oracle():
    # n=64, three eigenvalues: U^T U = I verified by dense multiplication
    gt = generate_ground_truth(64, [1.0, 0.75, 0.5], seed=11)
    gram = gt.eigenvectors.T @ gt.eigenvectors
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-12
    assert np.all(np.diff(gt.eigenvalues) <= 0)


def test_forced_coordinate_vector():
    gt = from_eigenvectors(np.array([1.0, 0.0]), [1.0])
    assert gt.mu == 2.0
    np.testing.assert_allclose(gt.x_star, [1.0, 0.0], atol=0)


def test_rank1_dense_reconstruction():
    gt = generate_ground_truth(64, [2.5], seed=9)
    m1 = np.outer(gt.x_star, gt.x_star)
    m2 = gt.lam * np.outer(gt.u, gt.u)
    assert np.max(np.abs(m1 - m2)) <= 1e-12


def test_bit_reproducible():
    a = generate_ground_truth(100, [1.0, 0.5], seed=42)
    b = generate_ground_truth(100, [1.0, 0.5], seed=42)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
    c = generate_ground_truth(100, [1.0, 0.5], seed=43)
    assert not np.array_equal(a.eigenvectors, c.eigenvectors)


@pytest.mark.parametrize(
    "eigenvalues", [[-1.0], [0.0], [0.5, 1.0], []]
)
def test_bad_eigenvalues_rejected(eigenvalues):
    with pytest.raises(ValueError):
        generate_ground_truth(10, eigenvalues, seed=0)


def test_rank_exceeding_dimension_rejected():
    with pytest.raises(ValueError):
        generate_ground_truth(2, [3.0, 2.0, 1.0], seed=0)


def test_incoherence_extremes():
    e1 = np.zeros(8)
    e1[0] = 1.0
    assert incoherence(e1) == 8.0
    flat = np.full(16, 1.0 / 4.0)
    assert abs(incoherence(flat) - 1.0) <= 1e-12


def test_incoherence_matches_direct_scan():
    gt = generate_ground_truth(1000, [1.0], seed=7)
    u = gt.u
    # direct n * max u_i^2 scan
    direct = 1000 * max(float(v) ** 2 for v in u)
    assert abs(gt.mu - direct) <= 1e-12


def test_incoherence_range_and_rejection(rng):
    for seed in range(5):
        gt = generate_ground_truth(50, [1.0, 0.3], seed=seed)
        assert 1.0 <= gt.mu <= 50.0
    with pytest.raises(ValueError):
        incoherence(rng.standard_normal((20, 2)))


def test_orthonormalize_reorthogonalizes():
    rng = np.random.default_rng(0)
    # nearly dependent columns still come out orthonormal
    a = rng.standard_normal((40, 3))
    a[:, 1] = a[:, 0] + 1e-9 * a[:, 1]
    q = orthonormalize(a)
    assert np.max(np.abs(q.T @ q - np.eye(3))) <= 1e-12


def test_json_roundtrip(tmp_path):
    gt = generate_ground_truth(30, [1.0, 0.25], seed=5)
    path = tmp_path / "gt.json"
    gt.save(path)
    back = GroundTruth.load(path)
    assert back.n == gt.n and back.r == gt.r
    np.testing.assert_allclose(back.eigenvectors, gt.eigenvectors, atol=0)
    d = json.loads(path.read_text())
    assert set(d) == {"n", "r", "eigenvalues", "mu", "seed", "u_star"}
