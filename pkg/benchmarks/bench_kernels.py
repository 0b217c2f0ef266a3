#!/usr/bin/env python3
"""Benchmark the compiled pair-traversal kernels against the NumPy fallback.

Times the three hot kernels on masks at solver-relevant sizes, plus one full
rank-1 trajectory, under both backends.  Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from gdmc import (
    SolverConfig,
    gd_run,
    generate_ground_truth,
    kernels,
    make_observation,
)


def time_call(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, p, backend):
    kernels.use_backend(backend)
    gt = generate_ground_truth(n, [1.0], seed=0)
    obs = make_observation(gt, p, 0.01, mask_seed=1, noise_seed=2)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(n)
    X = np.ascontiguousarray(rng.standard_normal((n, 3)))
    ii, jj, w = obs.mask.ii, obs.mask.jj, obs.w_obs
    rows = {
        "pair_apply (vec)": time_call(kernels.pair_apply, ii, jj, obs.mo_w, x),
        "pair_gram (vec)": time_call(kernels.pair_gram_apply, ii, jj, w, x),
        "pair_gram (r=3)": time_call(kernels.pair_gram_apply, ii, jj, w, X),
        "pair_loss (vec)": time_call(
            kernels.pair_loss_sq, ii, jj, x, gt.x_star, obs.noise.values
        ),
    }
    return obs.mask.npairs, rows


def bench_solver(n, backend):
    kernels.use_backend(backend)
    gt = generate_ground_truth(n, [1.0], seed=0)
    obs = make_observation(gt, 0.1, 0.1 / n, mask_seed=1, noise_seed=2)
    cfg = SolverConfig(eta=0.1, T=200, beta0=1.0 / n, record_loss=True)
    t0 = time.perf_counter()
    gd_run(obs, cfg, seed=4)
    return time.perf_counter() - t0


def main():
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; nothing to compare")
    for n, p in ((1000, 0.1), (4000, 0.1)):
        results = {b: bench_kernels(n, p, b) for b in backends}
        npairs = results[backends[0]][0]
        print(f"\nn={n} p={p} ({npairs} stored pairs), best of 5, seconds:")
        names = results[backends[0]][1].keys()
        for name in names:
            line = f"  {name:18s}"
            for b in backends:
                line += f" {b}={results[b][1][name]:.5f}"
            if len(backends) == 2:
                speedup = results["python"][1][name] / results["cython"][1][name]
                line += f"  speedup x{speedup:.1f}"
            print(line)
    print("\nfull rank-1 run (n=2000, T=200, loss tracked), seconds:")
    for b in backends:
        print(f"  {b}: {bench_solver(2000, b):.2f}")
    kernels.use_backend(backends[0])


if __name__ == "__main__":
    main()
