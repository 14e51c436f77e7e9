"""Rolling-window out-of-sample evaluation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ghm.errors import InputError
from ghm.estimator.fit import FitOptions, HierarchicalFit, fit, predict_many
from ghm.estimator.model import Dataset, ModelConfig, index_values

OK, OUT_OF_REGION, EMPTY_CUBE = 0, 1, 2


@dataclass(frozen=True, eq=False)
class ForecastReport:
    """Forecasts for the test rows and the two accuracy measures.

    ``flags`` is 0 for a regular forecast, 1 when the index point fell
    outside the region and 2 when it fell in an unfitted cube; flagged
    rows use the constant term of the nearest fitted cube.
    """

    rows: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    flags: np.ndarray
    rmse: float
    cs: float

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "cs": self.cs, "n_test": int(self.rows.size),
                "n_flagged": int(np.count_nonzero(self.flags))}


def forecast_metrics(y_hat, y) -> tuple[float, float]:
    """Root mean squared error and the share of strictly agreeing signs."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise InputError("no test observations")
    rmse = math.sqrt(float(np.mean((y_hat - y) ** 2)))
    cs = float(np.mean(y_hat * y > 0.0))
    return rmse, cs


def nearest_constant(fit_: HierarchicalFit, x: np.ndarray) -> np.ndarray:
    """Constant coefficient of the fitted cube whose centre is closest to each point."""
    config = fit_.config
    part = config.partition()
    occupied = np.flatnonzero(fit_.occupancy)
    if occupied.size == 0:
        raise InputError("fit has no occupied cubes")
    idx = np.array([part.unravel(k) for k in occupied], dtype=np.float64)
    centres = part.corner(idx) + part.h / 2.0
    xc = np.clip(np.atleast_2d(x), -config.a, config.a)
    dist = np.linalg.norm(xc[:, None, :] - centres[None, :, :], axis=2)
    return fit_.coef[occupied[np.argmin(dist, axis=1)], 0]


def forecast_rows(fit_: HierarchicalFit, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Surface values at the index points of ``z`` with the fallback applied."""
    x = index_values(np.atleast_2d(z), fit_.theta)
    vals, status = predict_many(fit_, x)
    bad = status != OK
    if bad.any():
        vals = vals.copy()
        vals[bad] = nearest_constant(fit_, x[bad])
    return vals, status


def rolling_forecast(data: Dataset, config: ModelConfig, window: int, step: int = 1,
                     lag: int = 0, opts: FitOptions | None = None) -> ForecastReport:
    """Refit on a sliding window and forecast the rows that follow it.

    Row ``t`` of ``data`` pairs ``y_t`` with the predictors ``z_{t-lag}``.
    Each window of ``window`` pairs is fitted once and used for the next
    ``step`` pairs, then the window slides forward by ``step``.
    """
    if lag < 0:
        raise InputError("lag must be >= 0")
    if step < 1:
        raise InputError("step must be >= 1")
    y = data.y[lag:]
    z = data.z[: data.T - lag]
    n = y.size
    d = z.shape[1]
    if window < max(d, 2):
        raise InputError(f"window must be at least max(d, 2) = {max(d, 2)}")
    if window >= n:
        raise InputError(f"window {window} leaves no test rows out of {n}")
    opts = opts or FitOptions(warn=False)
    rows, preds, flags = [], [], []
    for start in range(0, n - window, step):
        stop = start + window
        test = np.arange(stop, min(stop + step, n))
        train = Dataset(y[start:stop], z[start:stop], data.block_dims)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            f = fit(train, config, opts)
        vals, status = forecast_rows(f, z[test])
        rows.append(test)
        preds.append(vals)
        flags.append(status)
    rows = np.concatenate(rows)
    y_hat = np.concatenate(preds)
    flag = np.concatenate(flags)
    rmse, cs = forecast_metrics(y_hat, y[rows])
    return ForecastReport(rows + lag, y[rows], y_hat, flag, rmse, cs)
