"""Marked Hawkes processes with matrix-exponential kernels."""

from ._gemhp import (
    EventStream,
    GemhpError,
    InputError,
    ModelSpec,
    check_stability,
    excitation_matrix,
    fit_qbe,
    fit_qmle,
    lan_profile,
    log_likelihood,
    mc_moment_study,
    observed_fisher,
    read_stream,
    rescaled_residuals,
    score,
    simulate,
    wald_intervals,
    write_stream,
)

__all__ = [
    "EventStream",
    "GemhpError",
    "InputError",
    "ModelSpec",
    "check_stability",
    "excitation_matrix",
    "fit_qbe",
    "fit_qmle",
    "lan_profile",
    "log_likelihood",
    "mc_moment_study",
    "observed_fisher",
    "read_stream",
    "rescaled_residuals",
    "score",
    "simulate",
    "wald_intervals",
    "write_stream",
]
