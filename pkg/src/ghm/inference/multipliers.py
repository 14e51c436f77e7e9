"""Lag kernels and Gaussian multiplier series with finite-range dependence."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded

from ghm.errors import InputError, NumericalError


def bartlett(x):
    """Triangular kernel ``max(0, 1 - |x|)``."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.maximum(0.0, 1.0 - x)
    return float(out) if out.ndim == 0 else out


def parzen(x):
    """Parzen kernel: ``1 - 6x^2 + 6|x|^3`` up to ``1/2``, ``2(1-|x|)^3`` up to 1, else 0."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    inner = 1.0 - 6.0 * x**2 + 6.0 * x**3
    outer = 2.0 * (1.0 - x) ** 3
    out = np.where(x <= 0.5, inner, np.where(x <= 1.0, outer, 0.0))
    return float(out) if out.ndim == 0 else out


KERNELS: dict[str, Callable] = {"bartlett": bartlett, "parzen": parzen}


def kernel_by_name(name: str) -> Callable:
    try:
        return KERNELS[name]
    except KeyError:
        raise InputError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


def block_length(T: int) -> int:
    """``floor(1.75 T^(1/3))``, at least 1."""
    if T < 1:
        raise InputError("T must be >= 1")
    return max(1, math.floor(1.75 * float(np.cbrt(T))))


def _resolve(kernel) -> tuple[str, Callable]:
    if isinstance(kernel, str):
        return kernel, kernel_by_name(kernel)
    return getattr(kernel, "__name__", "custom"), kernel


def eta_covariance_band(T: int, ell: int, kernel="bartlett") -> np.ndarray:
    """Lower band storage of ``Sigma[t, s] = a((t - s)/ell)``: row ``k`` holds lag ``k``.

    Lags ``k >= ell`` are left out, i.e. the kernel is taken to vanish
    outside ``(-1, 1)``.
    """
    if ell < 1:
        raise InputError("ell must be >= 1")
    _, a = _resolve(kernel)
    width = min(ell, T)
    lags = np.asarray(a(np.arange(width) / ell), dtype=np.float64)
    band = np.zeros((width, T))
    for k in range(width):
        band[k, : T - k] = lags[k]
    return band


# diagonal loadings tried in turn when the plain factorisation fails
JITTERS = (0.0, 1e-12, 1e-10, 1e-8)


@lru_cache(maxsize=32)
def _factor_named(T: int, ell: int, name: str) -> np.ndarray:
    return _factor(T, ell, kernel_by_name(name))


def _factor(T: int, ell: int, kernel: Callable) -> np.ndarray:
    """Banded Cholesky factor, with a diagonal jitter when the band is only semidefinite.

    Some kernels (Parzen with even ``ell``) have a spectral density that
    touches zero, so long bands lose positive definiteness in floating
    point.  The jittered factor is rescaled to unit variance; lag
    correlations then differ from ``a(k/ell)`` by at most the jitter and
    the band beyond ``ell`` stays exactly zero.
    """
    band = eta_covariance_band(T, ell, kernel)
    L = None
    for jitter in JITTERS:
        trial = band.copy()
        trial[0] += jitter
        try:
            L = cholesky_banded(trial, lower=True) / np.sqrt(1.0 + jitter)
            break
        except LinAlgError:
            continue
    if L is None:
        raise InputError("multiplier covariance is not positive semidefinite for this kernel")
    if not np.all(np.isfinite(L)):
        raise NumericalError("banded Cholesky factor is not finite")
    L.setflags(write=False)
    return L


def eta_cholesky(T: int, ell: int, kernel="bartlett") -> np.ndarray:
    """Banded Cholesky factor of the multiplier covariance (lower band storage)."""
    if T < 1:
        raise InputError("T must be >= 1")
    name, fn = _resolve(kernel)
    if isinstance(kernel, str):
        return _factor_named(T, ell, name)
    return _factor(T, ell, fn)


def banded_lower_matvec(L: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``L @ v`` for a lower-triangular band stored as ``L[k, j] = L_full[j + k, j]``."""
    T = v.shape[0]
    out = L[0] * v
    for k in range(1, L.shape[0]):
        out[k:] += L[k, : T - k] * v[: T - k]
    return out


def band_to_dense(L: np.ndarray) -> np.ndarray:
    T = L.shape[1]
    full = np.zeros((T, T))
    for k in range(L.shape[0]):
        idx = np.arange(T - k)
        full[idx + k, idx] = L[k, : T - k]
    return full


def draw_eta(T: int, ell: int, kernel="bartlett", rng=None) -> np.ndarray:
    """Gaussian multipliers with unit variance and ``Cov(eta_t, eta_s) = a((t-s)/ell)``.

    Draws standard normals and colours them with the banded Cholesky
    factor, so multipliers more than ``ell - 1`` steps apart are exactly
    independent.
    """
    rng = np.random.default_rng(rng)
    L = eta_cholesky(T, ell, kernel)
    return banded_lower_matvec(L, rng.standard_normal(T))
