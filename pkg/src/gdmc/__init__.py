"""Gradient descent for symmetric matrix completion with small random
initialization: solver, reference/leave-one-out diagnostics, and a
reproducible experiment harness."""

from . import kernels
from .diagnostics import (
    DiagnosticsSeries,
    PhaseReport,
    SpectralReport,
    aligned_error,
    incoherence_track,
    phase_boundaries,
    predicted_horizon,
    procrustes_error,
    signal_decomposition,
    spectral_report,
    top_eigenpair,
)
from .ground_truth import GroundTruth, generate_ground_truth, incoherence
from .observation import (
    LooContext,
    NoiseField,
    Observation,
    SampleMask,
    loo_mo_product,
    loo_product,
    make_observation,
    mo_product,
    observed_product,
    row_norm_estimate,
    row_norm_estimates,
    sample_mask,
)
from .solver import (
    ClosedFormCoeffs,
    SolverConfig,
    TrajectoryRecord,
    auto_horizon,
    default_loo_indices,
    full_obs_run,
    gd_run,
    gd_run_rank_r,
    gradient,
    init_point,
    loss,
)

__version__ = "0.1.0"
