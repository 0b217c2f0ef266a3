"""Measured quantities the convergence analysis is stated in.

Per-iteration series (signal/norm/orthogonal decomposition, sign-aligned
errors, deviations from the reference and leave-one-out trajectories,
incoherence), spectral concentration estimates, and phase-boundary
detection.  All log factors use the natural logarithm.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .observation import LooContext, mo_product
from .seeding import generator


@dataclass
class DiagnosticsSeries:
    """Per-iteration scalar series of a run; entry t describes the iterate
    before update t.  Rank-1 runs fill the signal fields; rank-r runs fill
    the singular-value and rotation-aligned fields instead."""

    beta: np.ndarray  # l2 norm (Frobenius for rank-r)
    x_inf: np.ndarray
    loss: np.ndarray | None = None
    incoherence_x: np.ndarray | None = None
    alpha: np.ndarray | None = None
    gamma: np.ndarray | None = None
    aligned_l2: np.ndarray | None = None
    aligned_inf: np.ndarray | None = None
    dev_ref_l2: np.ndarray | None = None
    dev_ref_inf: np.ndarray | None = None
    ref_alpha: np.ndarray | None = None
    ref_beta: np.ndarray | None = None
    ref_gamma: np.ndarray | None = None
    dev_proxy: np.ndarray | None = None
    sing_vals: np.ndarray | None = None  # (iters+1, r)
    procrustes: np.ndarray | None = None
    dev_ref_rot: np.ndarray | None = None
    dev_loo: dict = field(default_factory=dict)
    loo_entry: dict = field(default_factory=dict)
    loo_signal: dict = field(default_factory=dict)

    @property
    def iters(self):
        return self.beta.size - 1

    def column_items(self):
        """Ordered (name, array) pairs for CSV export; unset fields skipped."""
        items = []
        for name in (
            "alpha",
            "beta",
            "gamma",
            "x_inf",
            "loss",
            "aligned_l2",
            "aligned_inf",
            "dev_ref_l2",
            "dev_ref_inf",
            "ref_alpha",
            "ref_beta",
            "ref_gamma",
            "incoherence_x",
            "dev_proxy",
            "procrustes",
            "dev_ref_rot",
        ):
            arr = getattr(self, name)
            if arr is not None:
                items.append((name, arr))
        if self.sing_vals is not None:
            for k in range(self.sing_vals.shape[1]):
                items.append((f"sigma{k + 1}", self.sing_vals[:, k]))
        for l in sorted(self.dev_loo):
            items.append((f"dev_loo_{l}", self.dev_loo[l]))
        for l in sorted(self.loo_entry):
            items.append((f"loo_entry_{l}", self.loo_entry[l]))
        for l in sorted(self.loo_signal):
            items.append((f"loo_signal_{l}", self.loo_signal[l]))
        return items


def signal_decomposition(x, u_star):
    """(alpha, beta, gamma): signal component |u^T x|, norm, and orthogonal
    component norm.  u_star must be a unit vector."""
    u = np.asarray(u_star, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise ValueError("u_star must have unit norm")
    x = np.asarray(x, dtype=float)
    c = u @ x
    alpha = abs(c)
    beta = float(np.linalg.norm(x))
    gamma = float(np.linalg.norm(x - c * u))
    return alpha, beta, gamma


def aligned_error(x, x_star, norm="l2"):
    """min over signs of ||x +- x_star|| in the requested norm."""
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if x.shape != x_star.shape:
        raise ValueError("shape mismatch")
    if norm == "l2":
        return float(min(np.linalg.norm(x - x_star), np.linalg.norm(x + x_star)))
    if norm == "inf":
        return float(
            min(np.max(np.abs(x - x_star)), np.max(np.abs(x + x_star)))
        )
    raise ValueError("norm must be 'l2' or 'inf'")


def incoherence_track(x):
    """n * ||x||_inf^2 / ||x||_2^2; scale invariant, in [1, n]."""
    x = np.asarray(x, dtype=float)
    nrm2 = float(x @ x) if x.ndim == 1 else float(np.sum(x * x))
    if nrm2 == 0.0:
        raise ValueError("incoherence of the zero vector is undefined")
    return float(x.shape[0] * np.max(np.abs(x)) ** 2 / nrm2)


def factor_singular_values(x):
    """Singular values of an (n, r) factor, descending (small-r eigenproblem
    of x^T x, solved by the dense reference eigensolver)."""
    x2 = x[:, None] if x.ndim == 1 else x
    ev, _ = oracle.jacobi_eigen(x2.T @ x2)
    return np.sqrt(np.clip(ev, 0.0, None))


def procrustes_error(x, y):
    """||x R - y||_F minimized over orthogonal R.

    The minimizing R is the polar factor of x^T y, recovered from the dense
    reference eigensolver on the small r x r problem; evaluating the norm at
    the explicit minimizer keeps exact rotations at rounding level.  When
    x^T y is numerically singular the minimizer is not unique and the
    nuclear-norm value is returned instead."""
    x2 = x[:, None] if x.ndim == 1 else np.asarray(x, dtype=float)
    y2 = y[:, None] if y.ndim == 1 else np.asarray(y, dtype=float)
    if x2.shape != y2.shape:
        raise ValueError("factor shapes differ")
    m = x2.T @ y2
    ev, v = oracle.jacobi_eigen(m.T @ m)
    ev = np.clip(ev, 0.0, None)
    if ev[0] > 0 and ev[-1] > 1e-24 * ev[0]:
        rot = m @ (v * (1.0 / np.sqrt(ev))) @ v.T
        return float(np.linalg.norm(x2 @ rot - y2))
    nuclear = float(np.sum(np.sqrt(ev)))
    err2 = float(np.sum(x2 * x2)) + float(np.sum(y2 * y2)) - 2.0 * nuclear
    return float(np.sqrt(max(err2, 0.0)))


@dataclass
class EigenEstimate:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool


def top_eigenpair(op, n, tol=1e-8, max_iter=5000, seed=0):
    """Power iteration with Rayleigh quotient for a symmetric operator.

    Convergence: ||op(v) - value * v|| <= tol * |value|.  The returned vector
    has its largest-magnitude entry positive.  Non-convergence is reported
    through the result (and a warning), with the last residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = generator(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    value = 0.0
    residual = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        av = op(v)
        value = float(v @ av)
        residual = float(np.linalg.norm(av - value * v))
        if residual <= tol * max(abs(value), 1e-300):
            converged = True
            break
        nav = np.linalg.norm(av)
        if nav <= 1e-30:  # numerically the zero map on this probe
            value = 0.0
            residual = float(nav)
            converged = True
            break
        v = av / nav
    if not converged:
        warnings.warn(
            f"power iteration did not converge in {max_iter} iterations "
            f"(residual {residual:.3e})",
            stacklevel=2,
        )
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    return EigenEstimate(
        value=value, vector=v, iterations=it, residual=residual, converged=converged
    )


def spectral_norm_estimate(op, n, tol=1e-8, max_iter=5000, seed=0):
    """Spectral norm of a symmetric operator via power iteration on v -> op(op(v)).

    The squared composition is PSD, which avoids sign-flip stalls when the
    extreme eigenvalues have similar magnitude and opposite signs.
    """
    est = top_eigenpair(lambda v: op(op(v)), n, tol=tol, max_iter=max_iter, seed=seed)
    return float(np.sqrt(max(est.value, 0.0))), est


@dataclass
class SpectralReport:
    h_norm: float
    lambda_o: float
    bound_ratio: float
    tol: float
    h_converged: bool
    h_residual: float
    lambda_l: dict = field(default_factory=dict)
    u_l_dist: dict = field(default_factory=dict)

    def weyl_gap(self, lam_star):
        """|lambda_o - lam_star| - (h_norm + 2 tol); <= 0 when consistent."""
        return abs(self.lambda_o - lam_star) - (self.h_norm + 2.0 * self.tol)

    def to_json_dict(self):
        return {
            "h_norm": self.h_norm,
            "lambda_o": self.lambda_o,
            "bound_ratio": self.bound_ratio,
            "tol": self.tol,
            "h_converged": self.h_converged,
            "h_residual": self.h_residual,
            "lambda_l": {str(k): v for k, v in sorted(self.lambda_l.items())},
            "u_l_dist": {str(k): v for k, v in sorted(self.u_l_dist.items())},
        }


def spectral_report(obs, loo_indices=(), tol=1e-8, max_iter=5000, seed=0):
    """Concentration measurements of the observation around the planted matrix.

    h_norm estimates ||observed - planted||; lambda_o is the top eigenvalue
    of the observed matrix; per-l quantities are the top eigenpair of the
    leave-one-out matrix and the sign-aligned distance of its eigenvector
    from the planted one.  bound_ratio divides h_norm by
    lam_1 * mu * sqrt(log n / (n p)).
    """
    g = obs.ground
    n = g.n
    lam1 = float(g.eigenvalues[0])

    def h_apply(v):
        return mo_product(obs, v) - g.matvec(v)

    h_norm, h_est = spectral_norm_estimate(
        h_apply, n, tol=tol, max_iter=max_iter, seed=seed
    )
    lo = top_eigenpair(
        lambda v: mo_product(obs, v), n, tol=tol, max_iter=max_iter, seed=seed + 1
    )
    scale = lam1 * g.mu * np.sqrt(np.log(n) / (n * obs.p))
    report = SpectralReport(
        h_norm=h_norm,
        lambda_o=lo.value,
        bound_ratio=h_norm / scale,
        tol=tol,
        h_converged=h_est.converged,
        h_residual=h_est.residual,
    )
    u1 = g.eigenvectors[:, 0]
    for l in loo_indices:
        ctx = LooContext(obs, l)
        est = top_eigenpair(
            ctx.mo_product, n, tol=tol, max_iter=max_iter, seed=seed + 2 + l
        )
        report.lambda_l[int(l)] = est.value
        report.u_l_dist[int(l)] = aligned_error(est.vector, u1, norm="l2")
    return report


@dataclass
class PhaseReport:
    """Phase boundaries of a rank-1 run.  Empirical fields are None when the
    run was too short to detect the crossing ("undetected")."""

    t_star_pred: float
    t1_theory: int | None
    t1_vacuous: bool
    t2_emp: int | None
    t2_prime_emp: int | None
    t_star_emp: int | None

    def to_json_dict(self):
        return {
            "t_star_pred": self.t_star_pred,
            "t1_theory": self.t1_theory,
            "t1_vacuous": self.t1_vacuous,
            "t2_emp": self.t2_emp,
            "t2_prime_emp": self.t2_prime_emp,
            "t_star_emp": self.t_star_emp,
        }


def _first_above(values, threshold):
    idx = np.nonzero(values > threshold)[0]
    return int(idx[0]) if idx.size else None


def predicted_horizon(lam, n, beta0, eta):
    """Iterations to enter the locally convergent region:
    log(sqrt(lam n) / beta0) / log(1 + eta lam)."""
    return float(np.log(np.sqrt(lam * n) / beta0) / np.log1p(eta * lam))


def phase_boundaries(series, ground, eta, beta0, p):
    """Detect phase boundaries from a recorded rank-1 series.

    Theory-side fields use the stated closed forms; empirical fields are
    first-crossing indices of the reference norm (growth thresholds) and of
    the sign-aligned error (entry into the locally convergent region).
    """
    if ground.r != 1:
        raise ValueError("phase boundaries are defined for rank-1 runs")
    lam = ground.lam
    n = ground.n
    logn = np.log(n)
    t_star_pred = predicted_horizon(lam, n, beta0, eta)

    bound = np.sqrt(ground.mu**4 * logn**21 / (n * p)) * np.sqrt(n)
    if bound >= 1.0:
        t1 = int(np.floor(np.log(bound) / np.log1p(eta * lam)))
    else:
        t1 = None
    t1_vacuous = t1 is None or t1 >= t_star_pred

    t2 = t2p = t_star_emp = None
    if series.ref_beta is not None:
        ref_b2 = series.ref_beta**2
        t2 = _first_above(ref_b2, lam * (1.0 - 1.0 / logn))
        t2p = _first_above(ref_b2, lam / (64.0 * logn))
    if series.aligned_l2 is not None:
        below = np.nonzero(series.aligned_l2 <= np.sqrt(lam) / np.sqrt(logn))[0]
        t_star_emp = int(below[0]) if below.size else None

    return PhaseReport(
        t_star_pred=t_star_pred,
        t1_theory=t1,
        t1_vacuous=t1_vacuous,
        t2_emp=t2,
        t2_prime_emp=t2p,
        t_star_emp=t_star_emp,
    )
