"""Simulation design: true surface, true directions and the AR(1) data generator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ghm.errors import InputError
from ghm.estimator.model import Dataset, ModelConfig, ThetaParam, index_values
from ghm.relu_nets.activations import Activation

Z_HALF_WIDTH = 1.0 / 1.4
# observations per coefficient below which a cube drops to a lower degree
SPARSE_CUBE_FACTOR = 1.5


@dataclass(frozen=True)
class SimDesign:
    """Settings of one Monte Carlo design.

    ``noise_sd`` is the stationary standard deviation of the AR(1) error;
    the innovation sd is ``noise_sd * sqrt(1 - rho_eps^2)``.
    ``min_obs_per_coef`` is passed to :class:`ModelConfig`; sparse cubes near
    the corners of the region then fall back to lower polynomial degrees.
    """

    r: int = 2
    T: int = 1000
    m: int = 5
    rho_eps: float = 0.2
    a: float = 0.9
    vartheta: int = 2
    J: int = 100
    L: int = 20
    seed: int = 0
    activation: str = "relu"
    noise_sd: float = 0.2
    block_dim: int = 2
    M: int | None = None
    min_obs_per_coef: float = SPARSE_CUBE_FACTOR

    def __post_init__(self):
        if self.T < 50:
            raise InputError("T must be >= 50")
        if self.J < 1:
            raise InputError("J must be >= 1")
        if self.L < 1:
            raise InputError("L must be >= 1")
        if self.r < 1:
            raise InputError("r must be >= 1")
        if not -1.0 < self.rho_eps < 1.0:
            raise InputError("rho_eps must lie in (-1, 1) for a stationary error")
        if self.noise_sd < 0:
            raise InputError("noise_sd must be non-negative")
        Activation.parse(self.activation)

    @property
    def innovation_sd(self) -> float:
        return self.noise_sd * math.sqrt(1.0 - self.rho_eps**2)

    def model_config(self) -> ModelConfig:
        return ModelConfig((self.block_dim,) * self.r, self.a, self.vartheta, self.m, self.M,
                           self.activation, self.min_obs_per_coef)

    def to_dict(self) -> dict:
        return asdict(self)


def true_f(x, r: int | None = None):
    """``(2/r) * (sum over odd j of 5 x_j + sin(2 x_j) + sum over even j of exp(2.5 x_j))``.

    ``j`` counts from 1.  ``x`` is ``(r,)`` or ``(n, r)``.
    """
    x = np.asarray(x, dtype=np.float64)
    r = x.shape[-1] if r is None else r
    if x.shape[-1] != r:
        raise InputError(f"x has {x.shape[-1]} coordinates, expected {r}")
    odd = x[..., 0::2]
    even = x[..., 1::2]
    total = np.sum(5.0 * odd + np.sin(2.0 * odd), axis=-1) + np.sum(np.exp(2.5 * even), axis=-1)
    out = (2.0 / r) * total
    return float(out) if out.ndim == 0 else out


def true_theta(r: int, block_dim: int = 2) -> ThetaParam:
    """``(0.6, 0.8)`` for odd blocks and ``(0.6, -0.8)`` for even ones."""
    if r < 1:
        raise InputError("r must be >= 1")
    if block_dim != 2:
        raise InputError("the reference directions are two-dimensional")
    return ThetaParam(tuple(np.array([0.6, 0.8 if j % 2 == 0 else -0.8]) for j in range(r)))


def ar1_errors(T: int, rho: float, innovation_sd: float, rng) -> np.ndarray:
    """AR(1) path started from its stationary law."""
    e = np.empty(T)
    e[0] = rng.normal(0.0, innovation_sd / math.sqrt(1.0 - rho**2))
    v = rng.normal(0.0, innovation_sd, T)
    for t in range(1, T):
        e[t] = rho * e[t - 1] + v[t]
    return e


def simulate(design: SimDesign, rng=None) -> Dataset:
    """One sample: uniform regressors, AR(1) errors and ``y = f(z theta) + e``."""
    rng = np.random.default_rng(rng)
    theta = true_theta(design.r, design.block_dim)
    d = design.r * design.block_dim
    z = rng.uniform(-Z_HALF_WIDTH, Z_HALF_WIDTH, (design.T, d))
    eps = ar1_errors(design.T, design.rho_eps, design.innovation_sd, rng)
    y = true_f(index_values(z, theta), design.r) + eps
    return Dataset(y, z, theta.dims)


def eval_grid(a: float, r: int, L: int) -> np.ndarray:
    """Diagonal points ``(-a + l 2a/L) 1_r`` for ``l = 0..L``; shape ``(L + 1, r)``."""
    if L < 1:
        raise InputError("L must be >= 1")
    t = -a + np.arange(L + 1) * (2.0 * a / L)
    t[-1] = a
    return np.repeat(t[:, None], r, axis=1)
