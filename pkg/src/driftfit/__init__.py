"""driftfit: frequency-domain models of complex ocean drifter velocities.

A velocity record u + iv is modeled as a damped inertial oscillation (complex
Ornstein-Uhlenbeck process) on top of a Matern turbulent background, with
parameters estimated by maximizing a blurred Whittle likelihood over a
semi-parametric frequency mask.  Rolling-window fits track time-varying
parameters; likelihood-ratio tests choose between nested model variants.
"""

from .inference import (
    FitResult,
    LrtResult,
    chi2_threshold,
    fit,
    fit_nested,
    hessian_cov,
    initial_guess,
    likelihood_ratio,
)
from .ingest import (
    Trajectory,
    VelocitySegment,
    coriolis_frequency,
    parse_trajectory_csv,
    positions_to_velocities,
    read_velocity_csv,
    write_velocity_csv,
)
from .likelihood import blurred_whittle_loglik, whittle_loglik
from .model import (
    Acvs,
    ModelParams,
    Variant,
    matern_acvs,
    matern_spectrum,
    model_acvs,
    model_spectrum,
    ou_acvs,
    ou_spectrum,
    sampled_acvs,
    simulate,
    simulate_fbm,
)
from .rolling import RollingFit, LrtTrace, lrt_trace, rolling_fit, tv_spectrogram
from .series import ComplexSeries
from .spectral import (
    FrequencyMask,
    Periodogram,
    expected_periodogram,
    fourier_frequencies,
    periodogram,
)

__version__ = "0.1.0"

__all__ = [
    "Acvs",
    "ComplexSeries",
    "FitResult",
    "FrequencyMask",
    "LrtResult",
    "LrtTrace",
    "ModelParams",
    "Periodogram",
    "RollingFit",
    "Trajectory",
    "Variant",
    "VelocitySegment",
    "blurred_whittle_loglik",
    "chi2_threshold",
    "coriolis_frequency",
    "expected_periodogram",
    "fit",
    "fit_nested",
    "fourier_frequencies",
    "hessian_cov",
    "initial_guess",
    "likelihood_ratio",
    "lrt_trace",
    "matern_acvs",
    "matern_spectrum",
    "model_acvs",
    "model_spectrum",
    "ou_acvs",
    "ou_spectrum",
    "parse_trajectory_csv",
    "periodogram",
    "positions_to_velocities",
    "read_velocity_csv",
    "rolling_fit",
    "sampled_acvs",
    "simulate",
    "simulate_fbm",
    "tv_spectrogram",
    "whittle_loglik",
    "write_velocity_csv",
]
