import numpy as np
import pytest

from gdmc import generate_ground_truth, make_observation


def small_instance(n=32, p=0.5, sigma=0.05, seed=0, eigenvalues=(1.0,)):
    gt = generate_ground_truth(n, eigenvalues, seed=seed)
    obs = make_observation(
        gt, p, sigma, mask_seed=1000 + seed, noise_seed=2000 + seed
    )
    return gt, obs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
