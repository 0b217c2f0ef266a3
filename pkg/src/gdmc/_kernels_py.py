"""NumPy fallback for the pair-traversal kernels.

All kernels walk a symmetric sample set stored once per unordered pair
(i <= j, row-major order) and accumulate both orientations, so a pair is
never visited twice.  ``np.add.at`` performs unbuffered in-place addition in
pair order, which keeps the accumulation order identical to a sequential
loop over the pair list.
"""

import numpy as np

BACKEND = "python"


def pair_apply(ii, jj, w, x):
    """Apply the symmetric matrix with value w[k] on pair (ii[k], jj[k]) to x.

    x may be a vector (n,) or a factor matrix (n, r); the result has the
    same shape.
    """
    out = np.zeros_like(x)
    if x.ndim == 1:
        np.add.at(out, ii, w * x[jj])
        off = ii != jj
        np.add.at(out, jj[off], w[off] * x[ii[off]])
    else:
        np.add.at(out, ii, w[:, None] * x[jj])
        off = ii != jj
        np.add.at(out, jj[off], w[off, None] * x[ii[off]])
    return out


def pair_gram_apply(ii, jj, w, x):
    """Apply the masked Gram matrix of x, scaled per pair by w, to x itself.

    The implied symmetric matrix has value w[k] * <x_i, x_j> on pair
    (ii[k], jj[k]); rows of a 2-d x are the factors.
    """
    if x.ndim == 1:
        g = x[ii] * x[jj] * w
    else:
        g = np.einsum("kr,kr->k", x[ii], x[jj]) * w
    return pair_apply(ii, jj, g, x)


def pair_sq_rowsums(ii, jj, w, x):
    """Weighted row sums of squares: out[i] = sum_k w[k] * x[j]^2 over pairs."""
    return pair_apply(ii, jj, w, x * x)


def pair_loss_sq(ii, jj, x, x_ref, e):
    """Sum of squared residuals (<x_i,x_j> - <x_ref_i,x_ref_j> - e[k]) over the
    symmetric sample set; off-diagonal pairs count twice."""
    if x.ndim == 1:
        r = x[ii] * x[jj] - x_ref[ii] * x_ref[jj] - e
    else:
        r = (
            np.einsum("kr,kr->k", x[ii], x[jj])
            - np.einsum("kr,kr->k", x_ref[ii], x_ref[jj])
            - e
        )
    mult = np.where(ii == jj, 1.0, 2.0)
    return float(np.sum(mult * r * r))
