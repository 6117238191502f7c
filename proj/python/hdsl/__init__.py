"""Sparse bilinear similarity learning for high-dimensional sparse data."""

from ._core import (
    Dataset,
    DimensionMismatch,
    IoError,
    Model,
    ModelError,
    ParseError,
    SolverError,
    convergence_bound,
    entry_recovery_auc,
    feature_recovery_auc,
    gen_truth,
    gen_uniform_sparse,
    knn_error,
    load_libsvm,
    neighbors_triplets,
    save_libsvm,
    scale_to_unit_range,
    smoothed_hinge,
    smoothed_hinge_deriv,
    train,
    truth_triplets,
)

__all__ = [
    "Dataset",
    "DimensionMismatch",
    "IoError",
    "Model",
    "ModelError",
    "ParseError",
    "SolverError",
    "convergence_bound",
    "entry_recovery_auc",
    "feature_recovery_auc",
    "gen_truth",
    "gen_uniform_sparse",
    "knn_error",
    "load_libsvm",
    "neighbors_triplets",
    "save_libsvm",
    "scale_to_unit_range",
    "smoothed_hinge",
    "smoothed_hinge_deriv",
    "train",
    "truth_triplets",
]
