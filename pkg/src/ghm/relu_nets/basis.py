"""Local polynomial bases: exact monomials and their network surrogates.

Monomials are enumerated by total degree, and within one degree in
decreasing lexicographic order of the exponent tuple, so the first
coordinate leads.  For ``r = 2, vartheta = 2`` this gives

    1, x1, x2, x1^2, x1 x2, x2^2
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ghm.errors import DimensionError, DomainError
from ghm.relu_nets.activations import RELU, Activation
from ghm.relu_nets.hdnn import (
    PowerVector,
    _check_domain,
    as_power,
    pad_count,
    reduce_tree,
)


def enumerate_powers(r: int, vartheta: int) -> tuple[PowerVector, ...]:
    """All ``alpha`` with ``|alpha|_1 <= vartheta`` in basis order."""
    if r < 1 or vartheta < 0:
        raise DomainError(f"need r >= 1 and vartheta >= 0, got r={r}, vartheta={vartheta}")
    out = []
    for deg in range(vartheta + 1):
        level = [a for a in itertools.product(range(deg, -1, -1), repeat=r) if sum(a) == deg]
        out.extend(PowerVector(a) for a in level)
    return tuple(out)


@dataclass(frozen=True)
class LocalBasisSpec:
    """Dimension, degree and network depth of a local basis."""

    r: int
    vartheta: int
    m: int
    power_list: tuple[PowerVector, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "power_list", enumerate_powers(self.r, self.vartheta))

    @property
    def size(self) -> int:
        return len(self.power_list)

    @cached_property
    def exponents(self) -> np.ndarray:
        """``(size, r)`` integer array of the power list."""
        out = np.array([p.exponents for p in self.power_list], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def degrees(self) -> np.ndarray:
        out = self.exponents.sum(axis=1)
        out.setflags(write=False)
        return out


def basis_size(r: int, vartheta: int) -> int:
    return math.comb(r + vartheta, r)


def _offsets(x, x0, r: int) -> tuple[np.ndarray, bool]:
    """``x - x0`` with coordinates on axis 0; second value tells if batched."""
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x.shape[0] != r or x0.shape[0] != r:
        raise DimensionError(f"x and x0 must have {r} coordinates")
    if x0.ndim == 1 and x.ndim == 2:
        x0 = x0[:, None]
    return x - x0, x.ndim == 2


def _power_stack(u: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """``u_i ** exps[j, i]`` arranged as ``(n_powers, r, ...)``."""
    top = int(exps.max(initial=0))
    table = np.empty((top + 1,) + u.shape)
    table[0] = 1.0
    for k in range(1, top + 1):
        table[k] = table[k - 1] * u
    return table[exps, np.arange(u.shape[0])[None, :]]


def poly_basis(x, x0, spec: LocalBasisSpec) -> np.ndarray:
    """Exact monomials ``(x - x0)^alpha_j`` in basis order.

    ``x`` may be ``(r,)`` or ``(r, n)``; the result is ``(size,)`` or
    ``(n, size)``.
    """
    u, batched = _offsets(x, x0, spec.r)
    vals = _power_stack(u, spec.exponents).prod(axis=1)
    return vals.T if batched else vals


def net_monomials(u: np.ndarray, exps: np.ndarray, m: int, activation: Activation = RELU):
    """Tree networks for every row of ``exps`` at once; ``u`` is ``(r, n)``.

    Returns ``(n, len(exps))``.  No domain check is done here.
    """
    r = u.shape[0]
    exps = np.asarray(exps)
    out = np.ones((u.shape[1], exps.shape[0]))
    # under plain ReLU a tree of all-ones leaves returns exactly 1
    work = np.flatnonzero(exps.any(axis=1)) if activation.s is None else np.arange(exps.shape[0])
    if work.size == 0:
        return out
    leaves = _power_stack(u, exps[work])
    q = pad_count(r)
    if q:
        pad = np.ones((leaves.shape[0], q) + leaves.shape[2:])
        leaves = np.concatenate([leaves, pad], axis=1)
    # tree axis first so reduce_tree pairs along it
    out[:, work] = reduce_tree(np.moveaxis(leaves, 1, 0), m, activation).T
    return out


def local_net_basis(x, x0, spec: LocalBasisSpec, activation: Activation = RELU) -> np.ndarray:
    """Network surrogate of :func:`poly_basis`: entry ``j`` is the tree network for ``alpha_j``.

    Offsets ``x - x0`` must lie in ``[0, 1 - ceil(log2 r) 2^-m]^r``.  Every
    entry lies in ``[0, 1]`` and exceeds the exact monomial by at most
    ``3^(ceil(log2 r) - 1) 2^-m``; the constant entry is exactly 1.
    """
    u, batched = _offsets(x, x0, spec.r)
    _check_domain(u, spec.m)
    uu = u if batched else u[:, None]
    out = net_monomials(uu, spec.exponents, spec.m, activation)
    return out if batched else out[0]


def _delta(delta, r: int) -> np.ndarray:
    d = np.array(as_power(delta).exponents, dtype=np.int64)
    if d.shape[0] != r:
        raise DimensionError(f"delta must have {r} entries")
    if np.any(d > 1):
        raise DomainError("delta entries must be 0 or 1")
    return d


def marginal_coefficients(spec: LocalBasisSpec, delta) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``alpha_j^delta`` (with ``0^0 = 1``) and shifted powers ``max(alpha_j - delta, 0)``."""
    d = _delta(delta, spec.r)
    exps = spec.exponents
    coef = np.where(d[None, :] == 1, exps, 1).prod(axis=1).astype(np.float64)
    return coef, np.maximum(exps - d[None, :], 0)


def marginal_basis(x, x0, spec: LocalBasisSpec, delta, activation: Activation = RELU) -> np.ndarray:
    """Basis whose inner product with ``beta`` approximates ``d^delta`` of the local fit.

    Entry ``j`` is ``alpha_j^delta`` times the tree network for
    ``max(alpha_j - delta, 0)``.
    """
    u, batched = _offsets(x, x0, spec.r)
    _check_domain(u, spec.m)
    coef, shifted = marginal_coefficients(spec, delta)
    uu = u if batched else u[:, None]
    out = net_monomials(uu, shifted, spec.m, activation) * coef[None, :]
    return out if batched else out[0]

