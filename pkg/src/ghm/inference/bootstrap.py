"""Dependent multiplier bootstrap for the index directions.

Each replication perturbs the in-region residuals with a fresh multiplier
series, ``y* = mean + resid * eta``, and re-estimates ``theta`` starting
from the original estimate.  The spread of ``theta*`` around the estimate
obtained from the unperturbed ``mean`` stands in for the sampling
distribution of ``theta_hat - theta``.

``mean="fitted"`` uses the fitted piecewise surface itself.  That surface
jumps at cube faces, and the jumps sit exactly on the faces of the cubes
along ``theta_hat``; any other direction pushes points across them, so the
resampled loss has a cusp at ``theta_hat`` and most refits stay there.
``mean="smoothed"`` (the default) removes the jumps by local linear
smoothing of the fitted values along the estimated index, with a window
of ``bandwidth`` cube sides.  Residuals are ``y - fitted`` in both cases.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ghm.errors import GHMError, InputError, NumericalError
from ghm.estimator.fit import FitOptions, HierarchicalFit, fit
from ghm.estimator.model import Dataset, index_values
from ghm.inference.multipliers import block_length, draw_eta, kernel_by_name
from ghm.inference.smoothing import local_linear_smooth
from ghm.parallel import run_indexed, worker_count

MAX_FAILURE_SHARE = 0.2
MEANS = ("smoothed", "fitted")


@dataclass(frozen=True)
class BootstrapConfig:
    """Replications, multiplier kernel, block length and refit budget.

    ``ell=None`` applies :func:`block_length`.  Each refit is one
    Nelder-Mead round of at most ``refit_maxfev`` evaluations started at
    the original estimate with simplex size ``refit_step``.
    """

    R: int = 100
    kernel: str = "bartlett"
    ell: int | None = None
    level: float = 0.95
    seed: int = 0
    refit_step: float = 0.05
    refit_maxfev: int = 60
    refit_rounds: int = 1
    mean: str = "smoothed"
    bandwidth: float = 1.0
    workers: int | None = None

    def __post_init__(self):
        if self.R < 2:
            raise InputError("R must be >= 2")
        if self.ell is not None and self.ell < 1:
            raise InputError("ell must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise InputError("level must lie in (0, 1)")
        kernel_by_name(self.kernel)
        if self.mean not in MEANS:
            raise InputError(f"mean must be one of {MEANS}, got {self.mean!r}")
        if not self.bandwidth > 0:
            raise InputError("bandwidth must be positive")

    def block_length_for(self, T: int) -> int:
        return block_length(T) if self.ell is None else self.ell

    def refit_options(self, fit_: HierarchicalFit) -> FitOptions:
        return FitOptions(
            n_starts=1,
            theta_start=fit_.theta,
            step=self.refit_step,
            maxfev=self.refit_maxfev,
            max_outer=self.refit_rounds,
            warn=False,
        )


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Draws of ``theta*`` and per-coordinate intervals.

    ``diff_quantiles[s]`` are the lower and upper quantiles of
    ``theta*_s - theta_center_s``, where ``theta_center`` is the refit on
    the unperturbed resampling mean (equal to ``theta_hat`` when that mean
    is the fitted surface).  ``ci`` is the interval for ``theta_s``
    implied by reading those quantiles as the law of ``theta_hat - theta``:
    ``[theta_hat - q_hi, theta_hat - q_lo]``.  ``ci_percentile`` is the
    plain percentile interval ``[theta_hat + q_lo, theta_hat + q_hi]``.
    """

    theta_hat: np.ndarray
    theta_center: np.ndarray
    draws: np.ndarray
    diff_quantiles: np.ndarray
    ci: np.ndarray
    ci_percentile: np.ndarray
    failures: tuple[int, ...]
    ell: int
    kernel: str
    R: int
    level: float
    seed: int
    mean: str = "smoothed"
    messages: tuple[str, ...] = field(default=())

    @property
    def n_ok(self) -> int:
        return self.draws.shape[0]

    def covers(self, theta_true) -> np.ndarray:
        """Per-coordinate indicator that ``theta_true`` lies in :attr:`ci`."""
        t = np.asarray(theta_true, dtype=np.float64)
        return (self.ci[:, 0] <= t) & (t <= self.ci[:, 1])

    def to_dict(self, include_draws: bool = False) -> dict:
        doc = {
            "theta_hat": self.theta_hat.tolist(),
            "theta_center": self.theta_center.tolist(),
            "ci": self.ci.tolist(),
            "ci_percentile": self.ci_percentile.tolist(),
            "diff_quantiles": self.diff_quantiles.tolist(),
            "failures": len(self.failures),
            "failed_replications": list(self.failures),
            "settings": {
                "R": self.R,
                "ell": self.ell,
                "kernel": self.kernel,
                "level": self.level,
                "seed": self.seed,
                "mean": self.mean,
            },
        }
        if include_draws:
            doc["draws"] = self.draws.tolist()
        return doc

    def to_json(self, include_draws: bool = False) -> str:
        return json.dumps(self.to_dict(include_draws), indent=2, sort_keys=True) + "\n"


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _refit(data: Dataset, y, base: HierarchicalFit, bcfg: BootstrapConfig) -> HierarchicalFit:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit(data.with_y(y), base.config, bcfg.refit_options(base))


def _one_replication(i: int, *, data, base, mean, resid, mask, ell, bcfg):
    rng = replication_rng(bcfg.seed, i)
    eta = draw_eta(data.T, ell, bcfg.kernel, rng)
    y_star = np.where(mask, mean + resid * eta, data.y)
    try:
        refit = _refit(data, y_star, base, bcfg)
    except (GHMError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return None, f"replication {i}: {exc}"
    return refit.theta.flat, None


def resampling_mean(data: Dataset, fit_: HierarchicalFit, bcfg: BootstrapConfig):
    """``(mean, resid, mask)``: the series perturbed by the multipliers.

    Out-of-region rows have zero residual and keep their response.
    """
    fitted, mask = fit_.fitted(data)
    fitted = np.where(mask, fitted, data.y)
    resid = np.where(mask, data.y - fitted, 0.0)
    if bcfg.mean == "fitted" or not mask.any():
        return fitted, resid, mask
    x = index_values(data.z, fit_.theta)[mask]
    smooth = local_linear_smooth(x, fitted[mask], bcfg.bandwidth * fit_.config.h)
    mean = data.y.copy()
    mean[mask] = smooth
    return mean, resid, mask


def bootstrap_theta(data: Dataset, fit_: HierarchicalFit, bcfg: BootstrapConfig | None = None
                    ) -> BootstrapResult:
    """Multiplier bootstrap of ``theta_hat``.

    Out-of-region observations keep their original response.  Every
    replication is warm-started at ``theta_hat``.  Failed
    refits are recorded and skipped; more than 20% failures raise
    :class:`NumericalError`.
    """
    bcfg = bcfg or BootstrapConfig()
    if data.T < 2:
        raise InputError("need at least two observations")
    mean, resid, mask = resampling_mean(data, fit_, bcfg)
    if bcfg.mean == "fitted":
        center = fit_.theta.flat
    else:
        # the same refit with all multipliers set to zero
        center = _refit(data, mean, fit_, bcfg).theta.flat
    ell = bcfg.block_length_for(data.T)
    task = partial(_one_replication, data=data, base=fit_, mean=mean, resid=resid,
                   mask=mask, ell=ell, bcfg=bcfg)
    results = run_indexed(task, bcfg.R, worker_count(bcfg.workers))
    draws = [r for r, _ in results if r is not None]
    failures = tuple(i for i, (r, _) in enumerate(results) if r is None)
    messages = tuple(msg for _, msg in results if msg)
    if len(failures) > MAX_FAILURE_SHARE * bcfg.R:
        raise NumericalError(
            f"{len(failures)} of {bcfg.R} bootstrap refits failed; first: {messages[0]}"
        )
    theta_hat = fit_.theta.flat
    draws = np.array(draws)
    diffs = draws - center[None, :]
    alpha = 1.0 - bcfg.level
    q = np.quantile(diffs, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0).T
    ci = np.column_stack([theta_hat - q[:, 1], theta_hat - q[:, 0]])
    ci_pct = np.column_stack([theta_hat + q[:, 0], theta_hat + q[:, 1]])
    return BootstrapResult(theta_hat, center, draws, q, ci, ci_pct, failures, ell, bcfg.kernel,
                           bcfg.R, bcfg.level, bcfg.seed, bcfg.mean, messages)
