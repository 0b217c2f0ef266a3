"""Planted rank-1 and rank-r symmetric PSD ground-truth models.

A model is a set of descending positive eigenvalues with orthonormal
eigenvectors; the target matrix is never materialized.  For rank 1 the
planted matrix is lam * u u^T and the planted factor is x_star = sqrt(lam) u.
"""

import json
from dataclasses import dataclass

import numpy as np

from .seeding import generator

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class GroundTruth:
    n: int
    eigenvalues: np.ndarray  # (r,), strictly positive, non-increasing
    eigenvectors: np.ndarray  # (n, r), orthonormal columns
    mu: float
    seed: int | None = None

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        U = np.asarray(self.eigenvectors, dtype=float)
        if ev.ndim != 1 or U.ndim != 2 or U.shape != (self.n, ev.size):
            raise ValueError("eigenvalue/eigenvector shapes are inconsistent")
        if ev.size > self.n:
            raise ValueError("rank exceeds dimension")
        if np.any(ev <= 0):
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(ev) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        gram = U.T @ U
        if np.max(np.abs(gram - np.eye(ev.size))) > ORTHO_TOL:
            raise ValueError("eigenvector columns are not orthonormal")

    @property
    def r(self):
        return self.eigenvalues.size

    @property
    def kappa(self):
        """Condition number lam_1 / lam_r."""
        return float(self.eigenvalues[0] / self.eigenvalues[-1])

    @property
    def factor(self):
        """Planted factor X = U diag(sqrt(eigenvalues)), shape (n, r)."""
        return self.eigenvectors * np.sqrt(self.eigenvalues)

    # rank-1 conveniences
    @property
    def lam(self):
        if self.r != 1:
            raise ValueError("lam is defined for rank-1 models only")
        return float(self.eigenvalues[0])

    @property
    def u(self):
        if self.r != 1:
            raise ValueError("u is defined for rank-1 models only")
        return self.eigenvectors[:, 0]

    @property
    def x_star(self):
        return np.sqrt(self.lam) * self.u

    def matvec(self, x):
        """Product of the planted matrix with x ((n,) or (n, r) array)."""
        X = self.factor
        return X @ (X.T @ x)

    def to_json_dict(self):
        return {
            "n": self.n,
            "r": self.r,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "mu": self.mu,
            "seed": self.seed,
            "u_star": [float(v) for v in self.eigenvectors.ravel()],
        }

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)

    @staticmethod
    def load(path):
        with open(path) as f:
            d = json.load(f)
        U = np.array(d["u_star"], dtype=float).reshape(d["n"], d["r"])
        return from_eigenvectors(U, d["eigenvalues"], seed=d["seed"])


def orthonormalize(a):
    """Modified Gram-Schmidt with one re-orthogonalization pass."""
    q = np.array(a, dtype=float, copy=True)
    if q.ndim != 2:
        raise ValueError("expected a 2-d array of column vectors")
    for k in range(q.shape[1]):
        v = q[:, k]
        for _ in range(2):
            for i in range(k):
                v -= (q[:, i] @ v) * q[:, i]
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            raise ValueError("linearly dependent columns")
        q[:, k] = v / nv
    return q


def incoherence(U):
    """n * max row squared l2-norm of an orthonormal (n, r) basis; in [1, n]."""
    U = np.atleast_2d(np.asarray(U, dtype=float).T).T
    gram = U.T @ U
    if np.max(np.abs(gram - np.eye(U.shape[1]))) > ORTHO_TOL:
        raise ValueError("input columns are not orthonormal")
    row_sq = np.sum(U * U, axis=1)
    return float(U.shape[0] * np.max(row_sq))


def _fix_signs(U):
    # largest-magnitude entry of each column made positive
    for k in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, k])))
        if U[i, k] < 0:
            U[:, k] = -U[:, k]
    return U


def from_eigenvectors(U, eigenvalues, seed=None):
    """Build a model from explicitly supplied orthonormal eigenvectors."""
    U = np.array(U, dtype=float, copy=True)
    if U.ndim == 1:
        U = U[:, None]
    ev = np.asarray(eigenvalues, dtype=float)
    return GroundTruth(
        n=U.shape[0], eigenvalues=ev, eigenvectors=U, mu=incoherence(U), seed=seed
    )


def generate_ground_truth(n, eigenvalues, seed):
    """Sample a planted model: Gaussian (n, r) matrix, orthonormalized columns.

    Deterministic for a fixed seed.  Column signs are normalized so the
    largest-magnitude entry of each eigenvector is positive.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.ndim != 1 or ev.size < 1:
        raise ValueError("eigenvalues must be a non-empty 1-d sequence")
    if n < ev.size:
        raise ValueError("rank exceeds dimension")
    rng = generator(seed)
    A = rng.standard_normal((n, ev.size))
    U = _fix_signs(orthonormalize(A))
    return GroundTruth(
        n=n, eigenvalues=ev, eigenvectors=U, mu=incoherence(U), seed=seed
    )
