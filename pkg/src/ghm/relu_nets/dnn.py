"""Simple feed-forward ReLU networks with hard-coded weights.

A network is an ordered list of ``(W_j, v_j)`` pairs and computes

    u -> W_m act(... W_2 act(W_1 act(u - v_1) - v_2) ...) - v_m)

i.e. every layer shifts, activates, then applies a linear map.  The last
map has a single row so the output is scalar.  Inputs may carry a trailing
batch axis: ``u`` of shape ``(c,)`` or ``(c, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ghm.errors import DimensionError, DomainError
from ghm.relu_nets.activations import RELU, Activation

# 3x3 block shared by the sawtooth and product networks.
W_TILDE = np.array(
    [
        [0.5, -0.5, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, -1.0, 1.0],
    ]
)
W_TILDE.setflags(write=False)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, ndmin=1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DnnWeights:
    """Weights and shifts of a simple DNN.

    ``layers[j] = (weight, shift)`` with ``weight`` of shape
    ``(c_{j+1}, c_j)`` and ``shift`` of shape ``(c_j,)``.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        fixed = []
        for weight, shift in self.layers:
            weight = _frozen(weight)
            if weight.ndim == 1:
                weight = _frozen(weight.reshape(1, -1))
            fixed.append((weight, _frozen(shift)))
        object.__setattr__(self, "layers", tuple(fixed))
        if not fixed:
            raise DimensionError("a network needs at least one layer")
        for j, (weight, shift) in enumerate(fixed):
            if weight.ndim != 2 or weight.shape[1] != shift.shape[0]:
                raise DimensionError(
                    f"layer {j}: weight {weight.shape} does not act on shift {shift.shape}"
                )
            if j + 1 < len(fixed) and weight.shape[0] != fixed[j + 1][1].shape[0]:
                raise DimensionError(
                    f"layer {j} emits {weight.shape[0]} units, layer {j + 1} expects "
                    f"{fixed[j + 1][1].shape[0]}"
                )
        if fixed[-1][0].shape[0] != 1:
            raise DimensionError("final layer must produce a scalar")

    @property
    def input_dim(self) -> int:
        return self.layers[0][1].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @classmethod
    def from_lists(cls, layers) -> DnnWeights:
        return cls(tuple((np.asarray(w), np.asarray(v)) for w, v in layers))

    def to_lists(self) -> list:
        return [[w.tolist(), v.tolist()] for w, v in self.layers]


def _as_input(u, weights: DnnWeights) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 0:
        u = u.reshape(1)
    if u.shape[0] != weights.input_dim:
        raise DimensionError(
            f"input has {u.shape[0]} entries, network expects {weights.input_dim}"
        )
    return u


def dnn_forward(u, weights: DnnWeights, activation: Activation = RELU):
    """Evaluate the network; returns a float, or an array over the batch axis."""
    h = _as_input(u, weights)
    if h.ndim == 1:
        return float(_forward_batch(h[:, None], weights, activation)[0])
    return _forward_batch(h, weights, activation)


def _forward_batch(h: np.ndarray, weights: DnnWeights, activation: Activation) -> np.ndarray:
    plain = activation.s is None
    for weight, shift in weights.layers:
        pre = h - shift[:, None]
        if plain:
            np.maximum(pre, 0.0, out=pre)
        else:
            pre = activation(pre)
        h = weight @ pre
    return h[0]


def dnn_jvp(u, du, weights: DnnWeights, activation: Activation = RELU):
    """Forward-mode derivative of the network along input direction ``du``.

    Returns ``(value, directional_derivative, margin)`` where ``margin`` is
    the smallest ``|pre-activation|`` over units whose pre-activation moves
    along ``du``.  A margin of exactly zero means the point sits on a kink
    in that direction and the derivative uses the ``relu'(0) = 0``
    convention.  Units that are flat along ``du`` never count as kinks.
    """
    h = _as_input(u, weights)
    batched = h.ndim == 2
    dh = np.asarray(du, dtype=np.float64)
    if batched and dh.ndim == 1:
        dh = np.broadcast_to(dh[:, None], h.shape)
    margin = np.full(h.shape[1:] if batched else (), np.inf)
    for weight, shift in weights.layers:
        pre = h - (shift[:, None] if batched else shift)
        gap = np.where(dh != 0.0, np.abs(pre), np.inf)
        margin = np.minimum(margin, gap.min(axis=0))
        h, dh = weight @ activation(pre), weight @ (activation.grad(pre) * dh)
    if batched:
        return h[0], dh[0], margin
    return float(h[0]), float(dh[0]), float(margin)


@lru_cache(maxsize=64)
def sawtooth_weights(m: int) -> DnnWeights:
    """Network computing ``sum_{k<=m} R^k(x)`` from the input ``(x/2, x, 0)``.

    Shifts ``(0, 2^{1-2k}, 0)`` for ``k = 1..m``; the first ``m-1`` maps are
    :data:`W_TILDE`, the last is ``(1, -1, 1)``.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    layers = []
    for k in range(1, m + 1):
        shift = (0.0, 2.0 ** (1 - 2 * k), 0.0)
        weight = W_TILDE if k < m else np.array([[1.0, -1.0, 1.0]])
        layers.append((weight, shift))
    return DnnWeights(tuple(layers))


def sawtooth_input(x) -> np.ndarray:
    """Input layer ``(x/2, x, 0)`` of :func:`sawtooth_weights` (batch on axis 1)."""
    x = np.asarray(x, dtype=np.float64)
    return np.stack([0.5 * x, x, np.zeros_like(x)])


@lru_cache(maxsize=64)
def product_weights(m: int) -> DnnWeights:
    """The fixed ``m + 3`` layer network approximating ``x * y``.

    Layers ``k = 1..m``: shift ``1_2 (x) (0, 2^{1-2k}, 0)``, map ``I_2 (x) W_TILDE``.
    Layer ``m + 1``: same shift form, map ``(-1, 1, -1, 1, -1, 1)``.
    Layers ``m + 2`` and ``m + 3``: shift ``-1``, maps ``-1`` and ``1``.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")
    block = np.kron(np.eye(2), W_TILDE)
    layers = []
    for k in range(1, m + 2):
        shift = np.tile([0.0, 2.0 ** (1 - 2 * k), 0.0], 2)
        weight = block if k <= m else np.array([[-1.0, 1.0, -1.0, 1.0, -1.0, 1.0]])
        layers.append((weight, shift))
    layers.append((np.array([[-1.0]]), np.array([-1.0])))
    layers.append((np.array([[1.0]]), np.array([-1.0])))
    return DnnWeights(tuple(layers))


def lift_xy(x, y, m: int) -> np.ndarray:
    """Input lift ``0.5 * ((x-y+1)/2, x-y+1, x+y+2^-m, (x+y)/2, x+y, 1/2)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = x - y + 1.0
    s = x + y
    out = np.empty((6,) + np.broadcast(x, y).shape)
    out[0] = 0.25 * d
    out[1] = 0.5 * d
    out[2] = 0.5 * (s + 2.0**-m)
    out[3] = 0.25 * s
    out[4] = 0.5 * s
    out[5] = 0.25
    return out


# d(lift)/dx and d(lift)/dy
LIFT_DX = _frozen([0.25, 0.5, 0.5, 0.25, 0.5, 0.0])
LIFT_DY = _frozen([-0.25, -0.5, 0.5, 0.25, 0.5, 0.0])
