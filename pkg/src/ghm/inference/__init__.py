"""Dependent multiplier bootstrap for the index directions."""

from ghm.inference.bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_theta,
    replication_rng,
    resampling_mean,
)
from ghm.inference.multipliers import (
    KERNELS,
    banded_lower_matvec,
    bartlett,
    block_length,
    draw_eta,
    eta_cholesky,
    eta_covariance_band,
    parzen,
)
from ghm.inference.smoothing import local_linear_smooth

__all__ = [
    "KERNELS",
    "BootstrapConfig",
    "BootstrapResult",
    "banded_lower_matvec",
    "bartlett",
    "block_length",
    "bootstrap_theta",
    "draw_eta",
    "eta_cholesky",
    "eta_covariance_band",
    "local_linear_smooth",
    "parzen",
    "replication_rng",
    "resampling_mean",
]
