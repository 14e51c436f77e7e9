"""Cube-partitioned sieve least squares for hierarchical index models."""

from ghm.estimator.fit import (
    ConvergenceWarning,
    FitOptions,
    HierarchicalFit,
    estimate_marginal,
    fit,
    predict,
    predict_many,
    start_points,
)
from ghm.estimator.io import (
    fit_from_dict,
    fit_to_dict,
    read_config,
    read_dataset,
    read_fit,
    write_dataset,
    write_fit,
)
from ghm.estimator.model import (
    CubePartition,
    Dataset,
    ModelConfig,
    ThetaParam,
    cube_index,
    default_cubes_per_axis,
    index_values,
)
from ghm.estimator.profile import (
    RIDGE,
    betas_to_array,
    fit_betas_given_theta,
    piecewise_eval,
    profile,
    q_loss,
)

__all__ = [
    "RIDGE",
    "ConvergenceWarning",
    "CubePartition",
    "Dataset",
    "FitOptions",
    "HierarchicalFit",
    "ModelConfig",
    "ThetaParam",
    "betas_to_array",
    "cube_index",
    "default_cubes_per_axis",
    "estimate_marginal",
    "fit",
    "fit_betas_given_theta",
    "fit_from_dict",
    "fit_to_dict",
    "index_values",
    "piecewise_eval",
    "predict",
    "predict_many",
    "profile",
    "q_loss",
    "read_config",
    "read_dataset",
    "read_fit",
    "start_points",
    "write_dataset",
    "write_fit",
]
