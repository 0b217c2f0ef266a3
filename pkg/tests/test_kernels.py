"""Backend equivalence for the pair-traversal kernels."""

import numpy as np
import pytest

from gdmc import _kernels_py, kernels


def random_pairs(rng, n, m):
    ii = rng.integers(0, n, size=m)
    jj = rng.integers(0, n, size=m)
    lo = np.minimum(ii, jj).astype(np.int64)
    hi = np.maximum(ii, jj).astype(np.int64)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


HAVE_CYTHON = "cython" in kernels.available_backends()
needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="extension not built")


@needs_cython
@pytest.mark.parametrize("shape", [(30,), (30, 3)])
def test_backends_agree(rng, shape):
    n = 30
    ii, jj = random_pairs(rng, n, 120)
    w = rng.standard_normal(ii.size)
    x = np.ascontiguousarray(rng.standard_normal(shape))
    y = np.ascontiguousarray(rng.standard_normal(shape))
    e = rng.standard_normal(ii.size)
    from gdmc import _kernels

    for name in ("pair_apply", "pair_gram_apply"):
        a = getattr(_kernels, name)(ii, jj, w, x)
        b = getattr(_kernels_py, name)(ii, jj, w, x)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
    la = _kernels.pair_loss_sq(ii, jj, x, y, e)
    lb = _kernels_py.pair_loss_sq(ii, jj, x, y, e)
    assert abs(la - lb) <= 1e-11 * max(1.0, abs(la))
    if x.ndim == 1:
        sa = _kernels.pair_sq_rowsums(ii, jj, np.abs(w), x)
        sb = _kernels_py.pair_sq_rowsums(ii, jj, np.abs(w), x)
        np.testing.assert_allclose(sa, sb, rtol=0, atol=1e-13)


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_vector_and_single_column_paths_identical(rng, backend):
    # the rank-1 solver uses the vector kernels while the rank-r solver uses
    # the matrix kernels on (n, 1); they must agree bitwise
    prev = kernels.use_backend(backend)
    try:
        n = 40
        ii, jj = random_pairs(rng, n, 200)
        w = rng.standard_normal(ii.size)
        x = rng.standard_normal(n)
        xm = np.ascontiguousarray(x[:, None])
        for fn in (kernels.pair_apply, kernels.pair_gram_apply):
            assert np.array_equal(fn(ii, jj, w, x), fn(ii, jj, w, xm)[:, 0])
        e = rng.standard_normal(ii.size)
        y = rng.standard_normal(n)
        ym = np.ascontiguousarray(y[:, None])
        assert kernels.pair_loss_sq(ii, jj, x, y, e) == kernels.pair_loss_sq(
            ii, jj, xm, ym, e
        )
    finally:
        kernels.use_backend(prev)


def test_diagonal_pairs_counted_once(rng):
    n = 6
    ii = np.array([0, 2, 2], dtype=np.int64)
    jj = np.array([0, 2, 4], dtype=np.int64)
    w = np.array([2.0, 3.0, 1.0])
    x = rng.standard_normal(n)
    y = kernels.pair_apply(ii, jj, w, x)
    expect = np.zeros(n)
    expect[0] = 2.0 * x[0]
    expect[2] = 3.0 * x[2] + 1.0 * x[4]
    expect[4] = 1.0 * x[2]
    np.testing.assert_allclose(y, expect, atol=1e-15)


def test_use_backend_roundtrip():
    current = kernels.backend()
    prev = kernels.use_backend("python")
    assert kernels.backend() == "python"
    kernels.use_backend(prev)
    assert kernels.backend() == current
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@needs_cython
def test_fallback_backend_end_to_end():
    # a full solver run on the NumPy fallback tracks the compiled one
    from gdmc import SolverConfig, gd_run, generate_ground_truth, make_observation

    gt = generate_ground_truth(150, [1.0], seed=1)
    obs = make_observation(gt, 0.3, 0.01, mask_seed=2, noise_seed=3)
    cfg = SolverConfig(eta=0.1, T=60, beta0=1 / 150, loo_indices=(0, 75))
    finals = {}
    for backend in ("cython", "python"):
        prev = kernels.use_backend(backend)
        try:
            finals[backend] = gd_run(obs, cfg, seed=4)
        finally:
            kernels.use_backend(prev)
    a, b = finals["cython"], finals["python"]
    np.testing.assert_allclose(a.x_final, b.x_final, rtol=0, atol=1e-11)
    np.testing.assert_allclose(
        a.series.aligned_l2, b.series.aligned_l2, rtol=0, atol=1e-11
    )
    for l in cfg.loo_indices:
        np.testing.assert_allclose(
            a.loo_final[l], b.loo_final[l], rtol=0, atol=1e-11
        )
