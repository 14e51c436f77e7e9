"""Error-surface grids of the exact-weight networks, ready for plotting.

Each grid is a header plus rows of coordinates, target, network value and
``error = network - target`` (for the sawtooth, ``target - network`` so
that all tabulated errors are non-negative).
"""

from __future__ import annotations

import numpy as np

from ghm.errors import InputError
from ghm.relu_nets.activations import Activation, relu, smoothed_relu
from ghm.relu_nets.hdnn import input_lift, reduce_tree
from ghm.relu_nets.product import product_net, sawtooth_norm_net

KINDS = ("product", "monomial", "monomial2", "sawtooth", "smoothed")


def _unit(n: int) -> np.ndarray:
    if n < 2:
        raise InputError("grid needs at least 2 points per axis")
    return np.linspace(0.0, 1.0, n)


def _mesh(n: int):
    g = _unit(n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    return X.ravel(), Y.ravel()


def _tree(points: np.ndarray, alpha, m: int, act: Activation) -> np.ndarray:
    # leaves are powers in [0, 1]; the tree is evaluated without the offset-domain check
    return reduce_tree(input_lift(points, alpha), m, act)


def demo_grid(kind: str, m: int, n: int = 101, power: int = 1, ypower: int = 1,
              s: int = 16, activation: str = "relu"):
    """Return ``(header, rows)`` for one error surface.

    ``product``: network product of ``x^power`` and ``y^ypower`` on the unit square.
    ``monomial``: three-input tree at ``alpha = (power, 0, 0)``, ``x = (x, 1, 1)``.
    ``monomial2``: three-input tree at ``alpha = (power, power, 0)``, ``x = (x, y, 1)``.
    ``sawtooth``: ``x (1 - x)`` against the sawtooth sum.
    ``smoothed``: ``sigma_s(u)`` against ReLU on ``[-2/s, 2/s]``.
    """
    act = Activation.parse(activation)
    if kind == "product":
        x, y = _mesh(n)
        sx, fy = x**power, y**ypower
        net = np.asarray(product_net(sx, fy, m, act))
        target = sx * fy
        return ["x", "y", "target", "net_value", "error"], np.column_stack(
            [x, y, target, net, net - target])
    if kind == "monomial":
        x = _unit(n)
        pts = np.vstack([x, np.ones_like(x), np.ones_like(x)])
        net = _tree(pts, (power, 0, 0), m, act)
        target = x**power
        return ["x", "target", "net_value", "error"], np.column_stack([x, target, net, net - target])
    if kind == "monomial2":
        x, y = _mesh(n)
        pts = np.vstack([x, y, np.ones_like(x)])
        net = _tree(pts, (power, power, 0), m, act)
        target = x**power * y**power
        return ["x", "y", "target", "net_value", "error"], np.column_stack(
            [x, y, target, net, net - target])
    if kind == "sawtooth":
        x = _unit(n)
        net = np.asarray(sawtooth_norm_net(x, m, act))
        target = x * (1.0 - x)
        return ["x", "target", "net_value", "error"], np.column_stack([x, target, net, target - net])
    if kind == "smoothed":
        u = np.linspace(-2.0 / s, 2.0 / s, n)
        net = smoothed_relu(u, s)
        target = relu(u)
        return ["u", "target", "net_value", "error"], np.column_stack([u, target, net, net - target])
    raise InputError(f"unknown demo kind {kind!r}; choose from {', '.join(KINDS)}")
