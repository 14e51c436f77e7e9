"""Exact-weight product network and the sawtooth approximation of x(1-x)."""

from __future__ import annotations

import numpy as np

from ghm.errors import DomainError
from ghm.relu_nets.activations import RELU, Activation
from ghm.relu_nets.dnn import (
    LIFT_DX,
    LIFT_DY,
    dnn_forward,
    dnn_jvp,
    lift_xy,
    product_weights,
    sawtooth_input,
    sawtooth_weights,
)


def _check_unit(name: str, v: np.ndarray) -> None:
    if np.any(~((v >= 0.0) & (v <= 1.0))):
        raise DomainError(f"{name} must lie in [0, 1]")


def _check_m(m: int) -> None:
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")


def _scalar_or_array(v, *args):
    return float(v) if all(np.ndim(a) == 0 for a in args) else v


def tent(x, k: int):
    """``T^k(x) = min(x/2, 2^{1-2k} - x/2)`` written with two ReLUs."""
    return np.maximum(0.5 * x, 0.0) - np.maximum(x - 2.0 ** (1 - 2 * k), 0.0)


def sawtooth_norm(x, m: int):
    """``sum_{k=1}^m R^k(x)`` with ``R^k = T^k o ... o T^1``.

    Interpolates ``g(x) = x (1 - x)`` at the dyadic points ``j 2^-m`` and
    stays within ``2^-m`` below ``g`` on ``[0, 1]``.
    """
    _check_m(m)
    x = np.asarray(x, dtype=np.float64)
    _check_unit("x", x)
    total = np.zeros_like(x)
    r = x
    for k in range(1, m + 1):
        r = tent(r, k)
        total = total + r
    return _scalar_or_array(total, x)


def sawtooth_norm_net(x, m: int, activation: Activation = RELU):
    """Same quantity as :func:`sawtooth_norm`, computed by the layered network."""
    _check_m(m)
    x = np.asarray(x, dtype=np.float64)
    _check_unit("x", x)
    u = sawtooth_input(x.reshape(-1))
    out = dnn_forward(u, sawtooth_weights(m), activation).reshape(x.shape)
    return _scalar_or_array(out, x)


def product_net(x, y, m: int, activation: Activation = RELU):
    """Approximate ``x * y`` on ``[0, 1]^2`` with the ``m + 3`` layer network.

    The output lies in ``[0, 1]``, equals 1 at ``(1, 1)``, and on
    ``[0, 1 - 2^-m] x [0, 1]`` over-estimates ``x * y`` by at most ``2^-m``.
    Inputs broadcast against each other.
    """
    _check_m(m)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_unit("x", x)
    _check_unit("y", y)
    shape = np.broadcast(x, y).shape
    u = lift_xy(np.broadcast_to(x, shape).reshape(-1), np.broadcast_to(y, shape).reshape(-1), m)
    out = dnn_forward(u, product_weights(m), activation).reshape(shape)
    return _scalar_or_array(out, x, y)


def product_core(x: np.ndarray, y: np.ndarray, m: int, activation: Activation = RELU):
    """Unchecked, structure-aware evaluation of the product network.

    Each ``I_2 (x) W_TILDE`` layer maps a block ``(a, 2a, c)`` to another
    block of the same form, so only ``a`` and ``c`` of each half are
    carried.  Same weights, far fewer array operations than the dense
    forward pass; used inside the monomial trees.
    """
    # row 0 carries the (x - y + 1)/2 half, row 1 the (x + y)/2 half
    a = np.stack([0.25 * (x - y + 1.0), 0.25 * (x + y)])
    c = np.stack([0.5 * (x + y + 2.0**-m), np.full(x.shape, 0.25)])
    if activation.s is None:
        return _product_core_relu(a, c, m)
    act = activation
    for k in range(1, m + 1):
        g = act(a) - act(2.0 * a - 2.0 ** (1 - 2 * k))
        a, c = 0.5 * g, g + act(c)
    g = act(2.0 * a - 2.0 ** (-1 - 2 * m)) - act(a) - act(c)
    h = -act(g[0] - g[1] + 1.0)
    return act(h + 1.0)


def _product_core_relu(a: np.ndarray, c: np.ndarray, m: int) -> np.ndarray:
    # For inputs in [0, 1] the carried a stays in [0, 2^(1-2k)] and c >= 0,
    # and Sterbenz's lemma makes 2a - 2^(1-2k) exact whenever it is positive,
    # so relu(a) = a and relu(c) = c bit for bit and can be skipped.
    for k in range(1, m + 1):
        t = 2.0 * a - 2.0 ** (1 - 2 * k)
        np.maximum(t, 0.0, out=t)
        g = a - t
        a = 0.5 * g
        c += g
    t = 2.0 * a - 2.0 ** (-1 - 2 * m)
    np.maximum(t, 0.0, out=t)
    g = t - a - c
    h = g[0] - g[1] + 1.0
    np.maximum(h, 0.0, out=h)
    h = 1.0 - h
    np.maximum(h, 0.0, out=h)
    return h


def product_net_grad(x, y, m: int, activation: Activation = RELU):
    """Analytic partials of :func:`product_net` by forward-mode chain rule.

    Returns ``(d_dx, d_dy, on_kink)``; ``on_kink`` marks points where a
    pre-activation that varies with ``x`` or ``y`` is exactly zero, so the
    ``relu'(0) = 0`` convention decided the value.
    """
    _check_m(m)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_unit("x", x)
    _check_unit("y", y)
    shape = np.broadcast(x, y).shape
    u = lift_xy(np.broadcast_to(x, shape).reshape(-1), np.broadcast_to(y, shape).reshape(-1), m)
    w = product_weights(m)
    _, dx, mx = dnn_jvp(u, LIFT_DX, w, activation)
    _, dy, my = dnn_jvp(u, LIFT_DY, w, activation)
    kink = (np.minimum(mx, my) == 0.0).reshape(shape)
    dx, dy = dx.reshape(shape), dy.reshape(shape)
    if not shape:
        return float(dx), float(dy), bool(kink)
    return dx, dy, kink


def product_net_dx(x, y, m: int, activation: Activation = RELU, return_kink: bool = False):
    """``d/dx`` of :func:`product_net`; within ``2^{-m-1}`` of ``y`` off the strip ``x > 1 - 2^-m``."""
    dx, _, kink = product_net_grad(x, y, m, activation)
    return (dx, kink) if return_kink else dx


def product_net_kink_margin(x, y, m: int) -> np.ndarray:
    """Smallest ``|pre-activation|`` among units that move with ``x``, per point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    shape = np.broadcast(x, y).shape
    u = lift_xy(np.broadcast_to(x, shape).reshape(-1), np.broadcast_to(y, shape).reshape(-1), m)
    _, _, margin = dnn_jvp(u, LIFT_DX, product_weights(m))
    return margin.reshape(shape)
