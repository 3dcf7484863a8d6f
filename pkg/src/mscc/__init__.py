"""Multi-task stochastic coordinate coding and a sparse-feature regression pipeline."""
from .encode import PatchGrouping, SubjectFeatureTable, encode, max_pool
from .linalg import SparseCode, soft_threshold, sparse_mul
from .metrics import aggregate, nmse, rmse, weighted_corr
from .regression import cross_validate, lasso_fit, predict, ridge_fit
from .train import (Dictionary, MsccConfig, TrainerState, init_dictionaries, objective,
                    train, update_dictionary, update_sparse_code)

__version__ = "0.1.0"

__all__ = [
    "Dictionary", "MsccConfig", "PatchGrouping", "SparseCode", "SubjectFeatureTable",
    "TrainerState", "aggregate", "cross_validate", "encode", "init_dictionaries",
    "lasso_fit", "max_pool", "nmse", "objective", "predict", "ridge_fit", "rmse",
    "soft_threshold", "sparse_mul", "train", "update_dictionary", "update_sparse_code",
    "weighted_corr",
]
