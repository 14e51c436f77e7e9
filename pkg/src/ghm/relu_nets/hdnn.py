"""Pairwise hierarchical networks approximating monomials ``x^alpha``.

The input ``x`` is lifted to ``(x_1^a_1, ..., x_r^a_r, 1, ..., 1)`` of length
``2^ceil(log2 r)`` (one padding 1 when ``r = 1``) and reduced by a balanced
binary tree whose every node is the product network.  Pairs are always
formed left to right: ``(u_1, u_2), (u_3, u_4), ...`` at every level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ghm.errors import DimensionError, DomainError
from ghm.relu_nets.activations import RELU, Activation
from ghm.relu_nets.product import product_core, product_net, product_net_grad


@dataclass(frozen=True)
class PowerVector:
    """Multi-index ``alpha`` of non-negative integer exponents."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(a) for a in self.exponents)
        if not exps:
            raise DomainError("power vector must have at least one entry")
        if any(a < 0 for a in exps) or any(a != b for a, b in zip(exps, self.exponents)):
            raise DomainError(f"exponents must be non-negative integers: {self.exponents!r}")
        object.__setattr__(self, "exponents", exps)

    @property
    def r(self) -> int:
        return len(self.exponents)

    @property
    def norm1(self) -> int:
        return sum(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def __repr__(self) -> str:
        return f"PowerVector{self.exponents}"


def as_power(alpha) -> PowerVector:
    return alpha if isinstance(alpha, PowerVector) else PowerVector(tuple(alpha))


def tree_depth(r: int) -> int:
    """Number of tree levels: ``ceil(log2 r)``, but one level when ``r = 1``."""
    return max(1, math.ceil(math.log2(r))) if r > 1 else 1


def pad_count(r: int) -> int:
    return 2 ** tree_depth(r) - r


def max_offset(r: int, m: int) -> float:
    """Largest admissible coordinate ``h = 1 - depth * 2^-m`` for the bounds to hold."""
    return 1.0 - tree_depth(r) * 2.0**-m


def value_bound(r: int, m: int) -> float:
    """Upper bound ``3^(depth-1) 2^-m`` on the over-estimate of ``x^alpha``."""
    return 3.0 ** (tree_depth(r) - 1) * 2.0**-m


def input_lift(x, alpha) -> np.ndarray:
    """Lifted vector ``(x_i^alpha_i ..., 1_q)``; batch axis (if any) stays last."""
    alpha = as_power(alpha)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != alpha.r:
        raise DimensionError(f"x has {x.shape[0]} coordinates, alpha has {alpha.r}")
    powers = x ** np.array(alpha.exponents, dtype=np.float64).reshape((-1,) + (1,) * (x.ndim - 1))
    ones = np.ones((pad_count(alpha.r),) + x.shape[1:])
    return np.concatenate([powers, ones], axis=0)


def _check_domain(x: np.ndarray, m: int) -> None:
    hmax = max_offset(x.shape[0], m)
    if np.any(~((x >= 0.0) & (x <= hmax))):
        raise DomainError(
            f"hierarchical network inputs must lie in [0, {hmax}] "
            f"(1 - ceil(log2 r) 2^-m with r={x.shape[0]}, m={m})"
        )


def reduce_tree(leaves: np.ndarray, m: int, activation: Activation = RELU) -> np.ndarray:
    """Collapse axis 0 (a power of two) pairwise with the product network."""
    vals = leaves
    while vals.shape[0] > 1:
        vals = product_core(vals[0::2], vals[1::2], m, activation)
    return vals[0]


def reduce_tree_with_grad(leaves, dleaves, m: int, activation: Activation = RELU):
    """As :func:`reduce_tree` but also carries a directional derivative.

    Returns ``(value, derivative, on_kink)``; ``on_kink`` is set where a node
    that the derivative flows through sits exactly on a ReLU kink.
    """
    vals, dvals = leaves, dleaves
    kink = np.zeros(leaves.shape[1:], dtype=bool)
    while vals.shape[0] > 1:
        a, b = vals[0::2], vals[1::2]
        ga, gb, k = product_net_grad(a, b, m, activation)
        live = (dvals[0::2] != 0.0) | (dvals[1::2] != 0.0)
        kink = kink | (np.asarray(k) & live).any(axis=0)
        vals = np.asarray(product_net(a, b, m, activation))
        dvals = np.asarray(ga) * dvals[0::2] + np.asarray(gb) * dvals[1::2]
    return vals[0], dvals[0], kink


def hdnn_monomial(x, alpha, m: int, activation: Activation = RELU):
    """Network approximation of ``x^alpha`` for ``x`` in ``[0, h]^r``.

    Parameters
    ----------
    x : array_like, shape (r,) or (r, n)
        Point(s); every coordinate must lie in ``[0, 1 - ceil(log2 r) 2^-m]``.
    alpha : PowerVector or sequence of int
    m : int
        Depth parameter of each product node.

    Returns
    -------
    float or ndarray
        Value in ``[0, 1]`` exceeding ``x^alpha`` by at most
        :func:`value_bound` ``(r, m)``.
    """
    alpha = as_power(alpha)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] != alpha.r:
        raise DimensionError(f"x must have {alpha.r} coordinates")
    _check_domain(x, m)
    out = reduce_tree(input_lift(x, alpha), m, activation)
    return float(out) if x.ndim == 1 else out


def hdnn_monomial_partial(
    x, alpha, m: int, i: int, activation: Activation = RELU, return_kink: bool = False
):
    """Analytic ``d/dx_i`` of :func:`hdnn_monomial` (``i`` is 0-based).

    Leaves differentiate to ``alpha_i x_i^(alpha_i - 1)``; interior nodes use
    the product network's partials.  Off kinks the result is within
    ``3^(depth-1) |alpha|_1 2^-m`` of the true monomial derivative.  With
    ``return_kink`` a boolean flag (array) marks points where the
    ``relu'(0) = 0`` convention was used along the derivative path.
    """
    alpha = as_power(alpha)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] != alpha.r:
        raise DimensionError(f"x must have {alpha.r} coordinates")
    if not 0 <= i < alpha.r:
        raise DimensionError(f"axis {i} out of range for r={alpha.r}")
    _check_domain(x, m)
    leaves = input_lift(x, alpha)
    dleaves = np.zeros_like(leaves)
    a_i = alpha.exponents[i]
    if a_i > 0:
        dleaves[i] = a_i * x[i] ** (a_i - 1)
    _, d, kink = reduce_tree_with_grad(leaves, dleaves, m, activation)
    if x.ndim == 1:
        d, kink = float(d), bool(kink)
    return (d, kink) if return_kink else d
