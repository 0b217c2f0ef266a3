"""Slow, obviously-correct dense reference implementations.

Everything here is written with scalar loops and shares no code with the
fast pair-traversal kernels; tests validate every fast path against these.
Dense construction is limited to DENSE_MAX_N and the eigensolver to
EIGEN_MAX_N.
"""

import numpy as np

from .seeding import generator

DENSE_MAX_N = 512
EIGEN_MAX_N = 256


def _check_dense(n):
    if n > DENSE_MAX_N:
        raise ValueError(f"dense oracle limited to n <= {DENSE_MAX_N}")


def pair_set(mask):
    """Observed unordered pairs as a set of (i, j) tuples with i <= j."""
    return {(int(i), int(j)) for i, j in zip(mask.ii, mask.jj)}


def dense_mask_matrix(mask):
    """Symmetric 0/1 indicator matrix of the observed set."""
    _check_dense(mask.n)
    d = np.zeros((mask.n, mask.n))
    for i, j in zip(mask.ii, mask.jj):
        d[i, j] = 1.0
        d[j, i] = 1.0
    return d


def dense_noise_matrix(mask, noise):
    _check_dense(mask.n)
    e = np.zeros((mask.n, mask.n))
    for k in range(mask.npairs):
        i, j = mask.ii[k], mask.jj[k]
        e[i, j] = noise.values[k]
        e[j, i] = noise.values[k]
    return e


def dense_mstar(ground):
    """Planted matrix, entry by entry from the eigendecomposition."""
    _check_dense(ground.n)
    n, r = ground.n, ground.r
    U = ground.eigenvectors
    ev = ground.eigenvalues
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(r):
                acc += ev[k] * U[i, k] * U[j, k]
            m[i, j] = acc
    return m


def dense_pomega(mask, p, a):
    """(1/p) * (indicator masked a)."""
    _check_dense(mask.n)
    d = dense_mask_matrix(mask)
    out = np.zeros_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i, j] = d[i, j] * a[i, j] / p
    return out


def dense_loo_pomega(mask, p, a, l):
    """Masked scaled projection, except row/column l kept exactly equal to a."""
    out = dense_pomega(mask, p, a)
    for j in range(a.shape[1]):
        out[l, j] = a[l, j]
    for i in range(a.shape[0]):
        out[i, l] = a[i, l]
    return out


def dense_mo(obs):
    """Dense observed matrix (1/p) * masked (planted + noise)."""
    m = dense_mstar(obs.ground)
    e = dense_noise_matrix(obs.mask, obs.noise)
    return dense_pomega(obs.mask, obs.mask.p, m + e)


def dense_loo_matrix(obs, l):
    """Dense leave-one-out observed matrix: exact planted values on row/column
    l (noise zeroed there), masked scaled noisy values elsewhere."""
    m = dense_mstar(obs.ground)
    e = dense_noise_matrix(obs.mask, obs.noise)
    out = dense_loo_pomega(obs.mask, obs.mask.p, m, l)
    ep = dense_pomega(obs.mask, obs.mask.p, e)
    n = obs.ground.n
    for i in range(n):
        for j in range(n):
            if i != l and j != l:
                out[i, j] += ep[i, j]
    return out


def dense_apply(a, x, order="ij"):
    """Matrix-vector (or matrix-matrix) product by scalar loops.

    order "ij" accumulates along each row; "ji" accumulates column by column.
    The two orders give independently summed results for cross-checking.
    """
    x2 = x[:, None] if x.ndim == 1 else x
    n, m = a.shape
    out = np.zeros((n, x2.shape[1]))
    if order == "ij":
        for i in range(n):
            for j in range(m):
                for c in range(x2.shape[1]):
                    out[i, c] += a[i, j] * x2[j, c]
    elif order == "ji":
        for j in range(m):
            for i in range(n):
                for c in range(x2.shape[1]):
                    out[i, c] += a[i, j] * x2[j, c]
    else:
        raise ValueError("order must be 'ij' or 'ji'")
    return out[:, 0] if x.ndim == 1 else out


def dense_gram(x):
    """x x^T for a vector, or X X^T for a factor matrix, by loops."""
    x2 = x[:, None] if x.ndim == 1 else x
    n, r = x2.shape
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for c in range(r):
                acc += x2[i, c] * x2[j, c]
            g[i, j] = acc
    return g


def dense_observed_product(obs, x):
    return dense_apply(dense_pomega(obs.mask, obs.mask.p, dense_gram(x)), x)


def dense_loo_product(obs, l, x):
    return dense_apply(dense_loo_pomega(obs.mask, obs.mask.p, dense_gram(x), l), x)


def dense_loss(obs, x):
    """Observed quadratic loss by a scalar loop over stored pairs
    (off-diagonal pairs contribute twice)."""
    x2 = x[:, None] if x.ndim == 1 else x
    f2 = obs.ground.factor
    acc = 0.0
    for k in range(obs.mask.npairs):
        i, j = obs.mask.ii[k], obs.mask.jj[k]
        resid = 0.0
        for c in range(x2.shape[1]):
            resid += x2[i, c] * x2[j, c]
        for c in range(f2.shape[1]):
            resid -= f2[i, c] * f2[j, c]
        resid -= obs.noise.values[k]
        acc += (1.0 if i == j else 2.0) * resid * resid
    return acc / (4.0 * obs.mask.p)


def dense_row_norm(mask, p, x, i):
    """Sampled row estimate of ||x||_2 by a scalar scan."""
    pairs = pair_set(mask)
    acc = 0.0
    for j in range(mask.n):
        if (min(i, j), max(i, j)) in pairs:
            acc += x[j] * x[j]
    return np.sqrt(acc / p)


def scalar_reference_mask(n, p, seed):
    """Reference sampler: one uniform draw per upper-triangle entry, row by
    row, from the same counter-based stream the fast sampler uses."""
    rng = generator(seed)
    pairs = []
    for i in range(n):
        for j in range(i, n):
            if rng.random() < p:
                pairs.append((i, j))
    return pairs


def fd_gradient(f, x, h=None):
    """Central finite differences, one coordinate at a time."""
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))))
    if h <= 0:
        raise ValueError("step must be positive")
    g = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = np.array(x, dtype=float, copy=True)
        xm = np.array(x, dtype=float, copy=True)
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
        it.iternext()
    return g


def jacobi_eigen(a, tol=1e-10, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues descending, eigenvector columns).  Sweeps stop when
    the off-diagonal Frobenius norm falls below tol * ||a||_F.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    if n > EIGEN_MAX_N:
        raise ValueError(f"jacobi_eigen limited to n <= {EIGEN_MAX_N}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    fnorm = np.linalg.norm(a)
    if fnorm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * fnorm:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                if abs(a[i, j]) <= 0.1 * tol * fnorm / n:
                    continue
                tau = (a[j, j] - a[i, i]) / (2.0 * a[i, j])
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[[i, j], :] = rot.T @ a[[i, j], :]
                a[:, [i, j]] = a[:, [i, j]] @ rot
                v[:, [i, j]] = v[:, [i, j]] @ rot
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals)
    return eigvals[order], v[:, order]


def _gs_orthonormalize(a):
    # small local Gram-Schmidt, independent of the package fast paths
    q = np.array(a, dtype=float, copy=True)
    for k in range(q.shape[1]):
        for _ in range(2):
            for i in range(k):
                q[:, k] -= (q[:, i] @ q[:, k]) * q[:, i]
        q[:, k] /= np.linalg.norm(q[:, k])
    return q


def random_orthogonal(r, seed):
    """Haar-ish random orthogonal matrix for rotation-sampling oracles."""
    rng = generator(seed)
    return _gs_orthonormalize(rng.standard_normal((r, r)))


def procrustes_by_sampling(x, y, n_samples, seed):
    """Smallest ||x R - y||_F over sampled random orthogonal R (upper bound
    oracle for the aligned Frobenius error)."""
    rng = generator(seed)
    best = np.inf
    for _ in range(n_samples):
        q = _gs_orthonormalize(rng.standard_normal((x.shape[1], x.shape[1])))
        best = min(best, float(np.linalg.norm(x @ q - y)))
        # reflections too: flip the first column
        qr = q.copy()
        qr[:, 0] = -qr[:, 0]
        best = min(best, float(np.linalg.norm(x @ qr - y)))
    return best
