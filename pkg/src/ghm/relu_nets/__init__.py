"""Exact-weight ReLU networks: products, sawtooth maps, monomial trees and local bases."""

from ghm.relu_nets.activations import (
    RELU,
    Activation,
    relu,
    relu_grad,
    smoothed_relu,
    smoothed_relu_grad,
)
from ghm.relu_nets.basis import (
    LocalBasisSpec,
    basis_size,
    enumerate_powers,
    local_net_basis,
    marginal_basis,
    marginal_coefficients,
    poly_basis,
)
from ghm.relu_nets.dnn import (
    W_TILDE,
    DnnWeights,
    dnn_forward,
    dnn_jvp,
    lift_xy,
    product_weights,
    sawtooth_input,
    sawtooth_weights,
)
from ghm.relu_nets.hdnn import (
    PowerVector,
    hdnn_monomial,
    hdnn_monomial_partial,
    input_lift,
    max_offset,
    tree_depth,
    value_bound,
)
from ghm.relu_nets.product import (
    product_net,
    product_net_dx,
    product_net_grad,
    product_net_kink_margin,
    sawtooth_norm,
    sawtooth_norm_net,
    tent,
)

__all__ = [
    "RELU",
    "W_TILDE",
    "Activation",
    "DnnWeights",
    "LocalBasisSpec",
    "PowerVector",
    "basis_size",
    "dnn_forward",
    "dnn_jvp",
    "enumerate_powers",
    "hdnn_monomial",
    "hdnn_monomial_partial",
    "input_lift",
    "lift_xy",
    "local_net_basis",
    "marginal_basis",
    "marginal_coefficients",
    "max_offset",
    "poly_basis",
    "product_net",
    "product_net_dx",
    "product_net_grad",
    "product_net_kink_margin",
    "product_weights",
    "relu",
    "relu_grad",
    "sawtooth_input",
    "sawtooth_norm",
    "sawtooth_norm_net",
    "sawtooth_weights",
    "smoothed_relu",
    "smoothed_relu_grad",
    "tent",
    "tree_depth",
    "value_bound",
]
