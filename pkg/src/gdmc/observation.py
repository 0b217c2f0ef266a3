"""Symmetric Bernoulli sampling, observation noise, and the masked operators.

The sample set is stored once per unordered pair (i <= j, row-major order)
and every product traverses it with symmetric accumulation, so memory and
work are O(|observed pairs|).  Leave-one-out variants reuse the same pair
traversal with per-pair weight overrides on the pairs touching the held-out
row, plus a dense correction for the unsampled part of that row; at p = 1
with zero noise the override weights coincide bitwise with the plain ones,
making the leave-one-out operators exactly equal to the plain ones.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .seeding import generator


@dataclass(frozen=True)
class SampleMask:
    """Symmetric Bernoulli(p) sample set over the upper triangle + diagonal."""

    n: int
    p: float
    seed: int | None
    ii: np.ndarray  # (m,) int64, ii <= jj, row-major sorted
    jj: np.ndarray  # (m,) int64

    @property
    def npairs(self):
        return self.ii.size

    def pairs_touching(self, l):
        """Indices into the pair list of pairs with one endpoint at row l."""
        return np.nonzero((self.ii == l) | (self.jj == l))[0]

    def row_neighbors(self, l):
        """Observed column indices of row l (includes l when the diagonal
        entry is observed)."""
        k = self.pairs_touching(l)
        other = np.where(self.ii[k] == l, self.jj[k], self.ii[k])
        return np.sort(other)

    def row_complement(self, l):
        """Column indices of row l that are NOT observed."""
        mask = np.ones(self.n, dtype=bool)
        mask[self.row_neighbors(l)] = False
        return np.nonzero(mask)[0]


def sample_mask(n, p, seed):
    """Sample the symmetric mask; each unordered pair (diagonal included) is
    kept independently with probability p.  p = 1 returns the full index set
    without consuming randomness."""
    if not 0 < p <= 1:
        raise ValueError("sampling probability must be in (0, 1]")
    if p == 1.0:
        ii = np.repeat(np.arange(n, dtype=np.int64), np.arange(n, 0, -1))
        jj = np.concatenate([np.arange(i, n, dtype=np.int64) for i in range(n)])
        return SampleMask(n=n, p=p, seed=seed, ii=ii, jj=jj)
    rng = generator(seed)
    rows, cols = [], []
    for i in range(n):
        hit = np.nonzero(rng.random(n - i) < p)[0]
        if hit.size:
            cols.append((i + hit).astype(np.int64))
            rows.append(np.full(hit.size, i, dtype=np.int64))
    if rows:
        ii = np.concatenate(rows)
        jj = np.concatenate(cols)
    else:
        ii = np.empty(0, dtype=np.int64)
        jj = np.empty(0, dtype=np.int64)
    return SampleMask(n=n, p=p, seed=seed, ii=ii, jj=jj)


def save_mask(mask, path):
    """Write the mask as a text edge list with an n/p/seed header."""
    with open(path, "w") as f:
        f.write("# gdmc mask v1\n")
        f.write(f"# n={mask.n} p={mask.p!r} seed={mask.seed}\n")
        for i, j in zip(mask.ii, mask.jj):
            f.write(f"{i} {j}\n")


def load_mask(path):
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != "# gdmc mask v1":
        raise ValueError("not a gdmc mask file")
    header = dict(kv.split("=") for kv in lines[1].lstrip("# ").split())
    n = int(header["n"])
    p = float(header["p"])
    seed = None if header["seed"] == "None" else int(header["seed"])
    pairs = [tuple(map(int, ln.split())) for ln in lines[2:] if ln.strip()]
    ii = np.array([a for a, _ in pairs], dtype=np.int64)
    jj = np.array([b for _, b in pairs], dtype=np.int64)
    if np.any(ii > jj) or (ii.size and (ii.min() < 0 or jj.max() >= n)):
        raise ValueError("edge list entries out of range")
    return SampleMask(n=n, p=p, seed=seed, ii=ii, jj=jj)


@dataclass(frozen=True)
class NoiseField:
    """Symmetric Gaussian noise on the observed pairs only, aligned with the
    mask pair order.  Regenerable from (mask, sigma, seed); never serialized."""

    sigma: float
    seed: int | None
    values: np.ndarray  # (npairs,) float64

    @staticmethod
    def for_mask(mask, sigma, seed):
        if sigma < 0:
            raise ValueError("noise level must be nonnegative")
        if sigma == 0:
            return NoiseField(sigma=0.0, seed=seed, values=np.zeros(mask.npairs))
        rng = generator(seed)
        return NoiseField(
            sigma=sigma, seed=seed, values=sigma * rng.standard_normal(mask.npairs)
        )


class Observation:
    """The observed matrix (1/p) * P_Omega(M_star + E) in operator form.

    Never materialized densely; products run over the pair list.  Per-pair
    weights for both the sampled-Gram operator and the observed-matrix
    operator are precomputed once.
    """

    def __init__(self, ground, mask, noise):
        if mask.n != ground.n:
            raise ValueError("mask and ground-truth dimensions differ")
        if noise.values.size != mask.npairs:
            raise ValueError("noise field does not match the mask")
        self.ground = ground
        self.mask = mask
        self.noise = noise
        X = ground.factor
        self._mstar_pairs = np.einsum("kr,kr->k", X[mask.ii], X[mask.jj])
        self.w_obs = np.full(mask.npairs, 1.0 / mask.p)
        self.mo_w = (self._mstar_pairs + noise.values) / mask.p
        self._warn_noise_regime()

    def _warn_noise_regime(self):
        g = self.ground
        lam1 = float(g.eigenvalues[0])
        bound = 10.0 * lam1 * g.mu * np.sqrt(np.log(g.n)) / g.n
        if self.noise.sigma > bound:
            warnings.warn(
                f"noise level {self.noise.sigma:g} exceeds the analyzed regime "
                f"(~{bound:g}); recovery error may be dominated by noise",
                stacklevel=3,
            )

    @property
    def n(self):
        return self.ground.n

    @property
    def p(self):
        return self.mask.p


def make_observation(ground, p, sigma, mask_seed, noise_seed):
    mask = sample_mask(ground.n, p, mask_seed)
    noise = NoiseField.for_mask(mask, sigma, noise_seed)
    return Observation(ground, mask, noise)


def _check_dim(obs, x):
    if x.shape[0] != obs.n:
        raise ValueError(f"operand has {x.shape[0]} rows, expected {obs.n}")


def observed_product(obs, x):
    """(1/p) P_Omega(x x^T) x; 2-d x uses row inner products of the factor."""
    x = np.ascontiguousarray(x, dtype=float)
    _check_dim(obs, x)
    return kernels.pair_gram_apply(obs.mask.ii, obs.mask.jj, obs.w_obs, x)


def mo_product(obs, x):
    """Observed-matrix product (1/p) P_Omega(M_star + E) x."""
    x = np.ascontiguousarray(x, dtype=float)
    _check_dim(obs, x)
    return kernels.pair_apply(obs.mask.ii, obs.mask.jj, obs.mo_w, x)


def row_norm_estimates(obs, x):
    """Vector of sampled row estimates of ||x||_2: entry i is
    sqrt((1/p) sum_j delta_ij x_j^2)."""
    x = np.ascontiguousarray(x, dtype=float)
    _check_dim(obs, x)
    s = kernels.pair_sq_rowsums(obs.mask.ii, obs.mask.jj, obs.w_obs, x)
    return np.sqrt(s)


def row_norm_estimate(mask, p, x, i):
    """Single sampled row estimate of ||x||_2 from row i."""
    if not 0 <= i < mask.n:
        raise ValueError("row index out of range")
    x = np.asarray(x, dtype=float)
    nb = mask.row_neighbors(i)
    return float(np.sqrt(np.sum(x[nb] ** 2) / p))


class LooContext:
    """Leave-one-out operators for one held-out row l.

    The held-out row and column use exact unsampled, noiseless values with no
    1/p scaling; everything else uses the plain masked scaled values.  Built
    once per (observation, l) and reused across iterations.
    """

    def __init__(self, obs, l):
        if not 0 <= l < obs.n:
            raise ValueError("leave-one-out index out of range")
        self.obs = obs
        self.l = l
        mask = obs.mask
        X = obs.ground.factor
        touch = mask.pairs_touching(l)
        # exact planted values on sampled pairs of row/col l (noise zeroed,
        # no 1/p): override weights for the pair traversal
        self.w_obs_l = obs.w_obs.copy()
        self.w_obs_l[touch] = 1.0
        self.mo_w_l = obs.mo_w.copy()
        self.mo_w_l[touch] = obs._mstar_pairs[touch]
        # dense correction data for the unsampled part of row/col l
        comp = mask.row_complement(l)
        self.diag_missing = bool(comp.size and np.any(comp == l))
        self.comp = comp[comp != l]
        self.mstar_row = X @ X[l]  # (n,)

    def product(self, x):
        """Apply the leave-one-out projection of x x^T to x."""
        x = np.ascontiguousarray(x, dtype=float)
        mask = self.obs.mask
        y = kernels.pair_gram_apply(mask.ii, mask.jj, self.w_obs_l, x)
        l, comp = self.l, self.comp
        if comp.size:
            c = x[comp] @ x[l] if x.ndim == 2 else x[comp] * x[l]
            if x.ndim == 2:
                y[comp] += c[:, None] * x[l]
                y[l] += x[comp].T @ c
            else:
                y[comp] += c * x[l]
                y[l] += x[comp] @ c
        if self.diag_missing:
            g = x[l] @ x[l] if x.ndim == 2 else x[l] * x[l]
            y[l] += g * x[l]
        return y

    def mo_product(self, x):
        """Apply the leave-one-out observed matrix M^(l) to x."""
        x = np.ascontiguousarray(x, dtype=float)
        mask = self.obs.mask
        y = kernels.pair_apply(mask.ii, mask.jj, self.mo_w_l, x)
        l, comp = self.l, self.comp
        if comp.size:
            m = self.mstar_row[comp]
            if x.ndim == 2:
                y[comp] += m[:, None] * x[l]
                y[l] += x[comp].T @ m
            else:
                y[comp] += m * x[l]
                y[l] += m @ x[comp]
        if self.diag_missing:
            y[l] += self.mstar_row[l] * x[l]
        return y


def loo_product(obs, l, x):
    """One-shot leave-one-out sampled-Gram product (see LooContext)."""
    return LooContext(obs, l).product(x)


def loo_mo_product(obs, l, x):
    """One-shot leave-one-out observed-matrix product (see LooContext)."""
    return LooContext(obs, l).mo_product(x)
