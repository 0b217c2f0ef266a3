"""Vanilla gradient descent on the observed loss.

One loop advances the main iterate, the fully-observed reference trajectory,
and any requested leave-one-out sequences from the shared random start, so
deviation metrics compare iterates computed in the same floating-point
environment.  No regularizer, no projection, no step-size schedule.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .diagnostics import (
    DiagnosticsSeries,
    aligned_error,
    factor_singular_values,
    predicted_horizon,
    procrustes_error,
    top_eigenpair,
)
from .observation import LooContext, mo_product, observed_product, row_norm_estimates
from .seeding import PROBE, derive_seed, generator


@dataclass
class SolverConfig:
    eta: float
    T: int
    beta0: float
    record_every: int = 10
    loo_indices: tuple = ()
    track_proxy: bool = False
    record_loss: bool = True
    track_loo_spectral: bool = True

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("step size must be positive")
        if self.T < 1:
            raise ValueError("iteration budget must be at least 1")
        if self.beta0 <= 0:
            raise ValueError("initialization scale must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        self.loo_indices = tuple(int(l) for l in self.loo_indices)


def _check_step_regime(eta, lam1):
    if eta * lam1 >= 0.5:
        raise ValueError(
            f"eta * lam1 = {eta * lam1:g} >= 0.5; the iteration is unstable"
        )
    if eta * lam1 > 0.1:
        warnings.warn(
            f"eta * lam1 = {eta * lam1:g} > 0.1 is outside the analyzed "
            "step-size regime",
            stacklevel=3,
        )


def init_point(n, r, beta0, seed):
    """(n, r) start with i.i.d. N(0, beta0^2 / n) entries."""
    if beta0 <= 0:
        raise ValueError("initialization scale must be positive")
    rng = generator(seed)
    return (beta0 / np.sqrt(n)) * rng.standard_normal((n, r))


def loss(obs, x):
    """Observed quadratic loss (1/4p) sum over observed (i,j) of
    (<x_i, x_j> - <x*_i, x*_j> - E_ij)^2."""
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape[0] != obs.n:
        raise ValueError("dimension mismatch")
    if x.ndim == 1:
        ref = obs.ground.x_star
    else:
        ref = obs.ground.factor
        if x.shape[1] != ref.shape[1]:
            raise ValueError("factor rank mismatch")
    v = kernels.pair_loss_sq(obs.mask.ii, obs.mask.jj, x, ref, obs.noise.values)
    return v / (4.0 * obs.p)


def gradient(obs, x):
    """Gradient of the observed loss: sampled-Gram product minus observed-
    matrix product."""
    return observed_product(obs, x) - mo_product(obs, x)


def gradient_rownorm_form(obs, x):
    """Equivalent gradient form ||x||^2 I_x x - M^o x built from the sampled
    row-norm estimates (rank-1 vectors only)."""
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("row-norm gradient form is defined for vectors")
    s = row_norm_estimates(obs, x) ** 2
    return s * x - mo_product(obs, x)


def default_loo_indices(ground, count=8):
    """Deterministic tracked subset: evenly spaced rows plus the row where
    the leading eigenvector is largest in magnitude."""
    n = ground.n
    idx = set(np.linspace(0, n - 1, num=min(count, n), dtype=int).tolist())
    idx.add(int(np.argmax(np.abs(ground.eigenvectors[:, 0]))))
    return tuple(sorted(idx))


def auto_horizon(lam1, n, beta0, eta, margin=200):
    """Default iteration budget: predicted entry time into the locally
    convergent region plus a safety margin."""
    return int(np.ceil(predicted_horizon(lam1, n, beta0, eta))) + margin


@dataclass
class TrajectoryRecord:
    n: int
    r: int
    eta: float
    beta0: float
    T: int
    iters: int  # last recorded iteration index
    diverged_at: int | None  # first non-finite or oversized iterate, if any
    series: DiagnosticsSeries
    x0: np.ndarray
    x_final: np.ndarray
    ref_final: np.ndarray
    loo_final: dict
    snapshots: dict
    ref_snapshots: dict
    loo_snapshots: dict
    proxy_final: np.ndarray | None = None

    @property
    def diverged(self):
        return self.diverged_at is not None

    def to_json_dict(self):
        """Metadata plus snapshot manifest (which iterations carry full
        vectors); the vectors themselves stay in memory."""
        return {
            "n": self.n,
            "r": self.r,
            "eta": self.eta,
            "beta0": self.beta0,
            "T": self.T,
            "iters": self.iters,
            "diverged_at": self.diverged_at,
            "loo_indices": sorted(int(l) for l in self.loo_final),
            "snapshot_iterations": sorted(int(t) for t in self.snapshots),
        }


def gd_run(obs, config, seed, x0=None):
    """Run rank-1 gradient descent with the reference and leave-one-out
    sequences advanced in lockstep.

    Scalar diagnostics are recorded every iteration; full vectors every
    config.record_every iterations.  A non-finite iterate or a norm above
    100 sqrt(lam) aborts, keeping the diagnostics up to the last finite
    iteration.  x0 overrides the seeded random start."""
    g = obs.ground
    if g.r != 1:
        raise ValueError("gd_run handles rank-1 models; use gd_run_rank_r")
    _check_step_regime(config.eta, g.lam)
    n, u, lam, xs = g.n, g.u, g.lam, g.x_star
    eta = config.eta
    norm_cap = 100.0 * np.sqrt(lam)

    if x0 is None:
        x0 = init_point(n, 1, config.beta0, seed)[:, 0]
    else:
        x0 = np.array(x0, dtype=float, copy=True)
    x = x0.copy()
    xref = x0.copy()
    loo = {l: x0.copy() for l in config.loo_indices}
    ctx = {l: LooContext(obs, l) for l in config.loo_indices}
    ul = {}
    if config.track_loo_spectral:
        for l in config.loo_indices:
            est = top_eigenpair(
                ctx[l].mo_product, n, seed=derive_seed(seed, PROBE, l)
            )
            ul[l] = est.vector
    xhat = x0.copy() if config.track_proxy else None

    rec = {
        k: []
        for k in (
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
        )
    }
    rec_dev = {l: [] for l in loo}
    rec_entry = {l: [] for l in loo}
    rec_sig = {l: [] for l in loo}
    snapshots, ref_snapshots = {}, {}
    loo_snapshots = {l: {} for l in loo}

    def record(t):
        c = float(u @ x)
        beta = float(np.linalg.norm(x))
        x_inf = float(np.max(np.abs(x)))
        rec["alpha"].append(abs(c))
        rec["beta"].append(beta)
        rec["gamma"].append(float(np.linalg.norm(x - c * u)))
        rec["x_inf"].append(x_inf)
        if config.record_loss:
            rec["loss"].append(loss(obs, x))
        rec["aligned_l2"].append(aligned_error(x, xs, "l2"))
        rec["aligned_inf"].append(aligned_error(x, xs, "inf"))
        d = x - xref
        rec["dev_ref_l2"].append(float(np.linalg.norm(d)))
        rec["dev_ref_inf"].append(float(np.max(np.abs(d))))
        rc = float(u @ xref)
        rec["ref_alpha"].append(abs(rc))
        rec["ref_beta"].append(float(np.linalg.norm(xref)))
        rec["ref_gamma"].append(float(np.linalg.norm(xref - rc * u)))
        rec["incoherence_x"].append(
            n * x_inf**2 / beta**2 if beta > 0 else np.nan
        )
        if xhat is not None:
            rec["dev_proxy"].append(float(np.linalg.norm(x - xhat)))
        for l in loo:
            dl = x - loo[l]
            rec_dev[l].append(float(np.linalg.norm(dl)))
            rec_entry[l].append(abs(loo[l][l] - xs[l]))
            if l in ul:
                rec_sig[l].append(abs(float(ul[l] @ dl)))
        if t % config.record_every == 0 or t == config.T:
            snapshots[t] = x.copy()
            ref_snapshots[t] = xref.copy()
            for l in loo:
                loo_snapshots[l][t] = loo[l].copy()

    diverged_at = None
    t_last = 0
    for t in range(config.T + 1):
        record(t)
        t_last = t
        if t == config.T:
            break
        x_next = x - eta * observed_product(obs, x) + eta * mo_product(obs, x)
        bref2 = float(xref @ xref)
        cref = float(u @ xref)
        xref_next = xref - eta * bref2 * xref + eta * lam * cref * u
        loo_next = {
            l: loo[l] - eta * ctx[l].product(loo[l]) + eta * ctx[l].mo_product(loo[l])
            for l in loo
        }
        if xhat is not None:
            xhat_next = xhat - eta * bref2 * xhat + eta * mo_product(obs, xhat)
        bad = not np.isfinite(x_next).all() or np.linalg.norm(x_next) > norm_cap
        for v in loo_next.values():
            bad = bad or not np.isfinite(v).all()
        if bad:
            diverged_at = t + 1
            break
        x = x_next
        xref = xref_next
        loo = loo_next
        if xhat is not None:
            xhat = xhat_next

    series = DiagnosticsSeries(
        alpha=np.array(rec["alpha"]),
        beta=np.array(rec["beta"]),
        gamma=np.array(rec["gamma"]),
        x_inf=np.array(rec["x_inf"]),
        loss=np.array(rec["loss"]) if config.record_loss else None,
        aligned_l2=np.array(rec["aligned_l2"]),
        aligned_inf=np.array(rec["aligned_inf"]),
        dev_ref_l2=np.array(rec["dev_ref_l2"]),
        dev_ref_inf=np.array(rec["dev_ref_inf"]),
        ref_alpha=np.array(rec["ref_alpha"]),
        ref_beta=np.array(rec["ref_beta"]),
        ref_gamma=np.array(rec["ref_gamma"]),
        incoherence_x=np.array(rec["incoherence_x"]),
        dev_proxy=np.array(rec["dev_proxy"]) if xhat is not None else None,
        dev_loo={l: np.array(v) for l, v in rec_dev.items()},
        loo_entry={l: np.array(v) for l, v in rec_entry.items()},
        loo_signal={l: np.array(v) for l, v in rec_sig.items() if v},
    )
    return TrajectoryRecord(
        n=n,
        r=1,
        eta=eta,
        beta0=config.beta0,
        T=config.T,
        iters=t_last,
        diverged_at=diverged_at,
        series=series,
        x0=x0,
        x_final=x,
        ref_final=xref,
        loo_final=dict(loo),
        snapshots=snapshots,
        ref_snapshots=ref_snapshots,
        loo_snapshots=loo_snapshots,
        proxy_final=xhat,
    )


@dataclass
class ClosedFormCoeffs:
    """Coefficients of the fully observed trajectory as a combination of the
    start vector and the planted direction: A[t] multiplies the start's
    component orthogonal to the planted direction (shrink products) and B[t]
    is the planted-direction coefficient (growth products times the initial
    overlap)."""

    A: np.ndarray  # (T+1,) running products of (1 - eta beta_t^2)
    B: np.ndarray  # (T+1,) running products of (1 - eta beta_t^2 + eta lam), times u.x0

    def reconstruct(self, t, x0, u_star):
        c0 = float(u_star @ x0)
        return self.A[t] * (x0 - c0 * u_star) + self.B[t] * u_star


@dataclass
class FullObsResult:
    alpha: np.ndarray  # from the vector iterates
    beta: np.ndarray
    gamma: np.ndarray
    scalar_alpha: np.ndarray  # from the three-variable recursion
    scalar_beta: np.ndarray
    scalar_gamma: np.ndarray
    signal: np.ndarray  # signed planted-direction component
    orth: np.ndarray  # component along the initial orthogonal direction
    coeffs: ClosedFormCoeffs
    snapshots: dict
    x0: np.ndarray
    x_final: np.ndarray


def full_obs_run(ground, x0, eta, T, record_every=10):
    """Fully observed, noiseless gradient descent from x0 (rank-1 only).

    Returns the vector trajectory statistics, the three-variable scalar
    recursion seeded from the actual start decomposition, and the running
    closed-form coefficients; the three representations agree to rounding.
    """
    if ground.r != 1:
        raise ValueError("the scalar recursion applies to rank-1 models only")
    _check_step_regime(eta, ground.lam)
    u, lam = ground.u, ground.lam
    x0 = np.asarray(x0, dtype=float)
    c0 = float(u @ x0)
    x0_perp = x0 - c0 * u
    g0 = float(np.linalg.norm(x0_perp))
    w = x0_perp / g0 if g0 > 0 else np.zeros_like(x0)

    alpha = np.empty(T + 1)
    beta = np.empty(T + 1)
    gamma = np.empty(T + 1)
    signal = np.empty(T + 1)
    orth = np.empty(T + 1)
    sa = np.empty(T + 1)
    sb = np.empty(T + 1)
    sg = np.empty(T + 1)
    A = np.empty(T + 1)
    B = np.empty(T + 1)
    sa[0], sg[0] = abs(c0), g0
    A[0], B[0] = 1.0, c0

    x = x0.copy()
    snapshots = {}
    for t in range(T + 1):
        c = float(u @ x)
        alpha[t] = abs(c)
        beta[t] = float(np.linalg.norm(x))
        gamma[t] = float(np.linalg.norm(x - c * u))
        signal[t] = c
        orth[t] = float(w @ x)
        sb[t] = np.sqrt(sa[t] ** 2 + sg[t] ** 2)
        if t % record_every == 0 or t == T:
            snapshots[t] = x.copy()
        if t == T:
            break
        b2 = float(x @ x)
        x = x - eta * b2 * x + eta * lam * c * u
        A[t + 1] = A[t] * (1.0 - eta * b2)
        B[t + 1] = B[t] * (1.0 - eta * b2 + eta * lam)
        s_b2 = sa[t] ** 2 + sg[t] ** 2
        sa[t + 1] = (1.0 - eta * s_b2 + eta * lam) * sa[t]
        sg[t + 1] = (1.0 - eta * s_b2) * sg[t]

    return FullObsResult(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        scalar_alpha=sa,
        scalar_beta=sb,
        scalar_gamma=sg,
        signal=signal,
        orth=orth,
        coeffs=ClosedFormCoeffs(A=A, B=B),
        snapshots=snapshots,
        x0=x0,
        x_final=x,
    )


def gd_run_rank_r(obs, config, seed, x0=None):
    """Rank-r gradient descent on the factor matrix, with per-iteration
    singular values and rotation-aligned errors.

    With r = 1 the iterates coincide entrywise with gd_run for the same
    seed."""
    g = obs.ground
    _check_step_regime(config.eta, float(g.eigenvalues[0]))
    n, r = g.n, g.r
    Xs = g.factor
    eta = config.eta
    norm_cap = 100.0 * np.sqrt(float(g.eigenvalues[0])) * np.sqrt(r)

    if x0 is None:
        X0 = init_point(n, r, config.beta0, seed)
    else:
        X0 = np.array(x0, dtype=float, copy=True)
    X = X0.copy()
    Xref = X0.copy()
    loo = {l: X0.copy() for l in config.loo_indices}
    ctx = {l: LooContext(obs, l) for l in config.loo_indices}

    rec = {k: [] for k in ("beta", "x_inf", "loss", "procrustes", "dev_ref_l2",
                           "dev_ref_inf", "dev_ref_rot")}
    sing = []
    rec_dev = {l: [] for l in loo}
    snapshots, ref_snapshots = {}, {}
    loo_snapshots = {l: {} for l in loo}

    def record(t):
        rec["beta"].append(float(np.linalg.norm(X)))
        rec["x_inf"].append(float(np.max(np.abs(X))))
        if config.record_loss:
            rec["loss"].append(loss(obs, X))
        sing.append(factor_singular_values(X))
        rec["procrustes"].append(procrustes_error(X, Xs))
        D = X - Xref
        rec["dev_ref_l2"].append(float(np.linalg.norm(D)))
        rec["dev_ref_inf"].append(float(np.max(np.abs(D))))
        rec["dev_ref_rot"].append(procrustes_error(X, Xref))
        for l in loo:
            rec_dev[l].append(float(np.linalg.norm(X - loo[l])))
        if t % config.record_every == 0 or t == config.T:
            snapshots[t] = X.copy()
            ref_snapshots[t] = Xref.copy()
            for l in loo:
                loo_snapshots[l][t] = loo[l].copy()

    diverged_at = None
    t_last = 0
    for t in range(config.T + 1):
        record(t)
        t_last = t
        if t == config.T:
            break
        X_next = X - eta * observed_product(obs, X) + eta * mo_product(obs, X)
        Xref_next = (
            Xref - eta * (Xref @ (Xref.T @ Xref)) + eta * (Xs @ (Xs.T @ Xref))
        )
        loo_next = {
            l: loo[l] - eta * ctx[l].product(loo[l]) + eta * ctx[l].mo_product(loo[l])
            for l in loo
        }
        bad = not np.isfinite(X_next).all() or np.linalg.norm(X_next) > norm_cap
        for v in loo_next.values():
            bad = bad or not np.isfinite(v).all()
        if bad:
            diverged_at = t + 1
            break
        X = X_next
        Xref = Xref_next
        loo = loo_next

    series = DiagnosticsSeries(
        beta=np.array(rec["beta"]),
        x_inf=np.array(rec["x_inf"]),
        loss=np.array(rec["loss"]) if config.record_loss else None,
        dev_ref_l2=np.array(rec["dev_ref_l2"]),
        dev_ref_inf=np.array(rec["dev_ref_inf"]),
        dev_ref_rot=np.array(rec["dev_ref_rot"]),
        sing_vals=np.array(sing),
        procrustes=np.array(rec["procrustes"]),
        dev_loo={l: np.array(v) for l, v in rec_dev.items()},
    )
    return TrajectoryRecord(
        n=n,
        r=r,
        eta=eta,
        beta0=config.beta0,
        T=config.T,
        iters=t_last,
        diverged_at=diverged_at,
        series=series,
        x0=X0,
        x_final=X,
        ref_final=Xref,
        loo_final=dict(loo),
        snapshots=snapshots,
        ref_snapshots=ref_snapshots,
        loo_snapshots=loo_snapshots,
    )
