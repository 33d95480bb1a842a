"""Sparse OLS regression, bagging, Coulomb-matrix kernel ridge and cross-validation."""

from .bagging import BaggedModel, bagged_fit, split_sizes
from .cv import CVReport, cross_validate_krr, cross_validate_ols
from .krr import (
    CoulombKernelModel, coulomb_matrix, krr_fit, laplacian_kernel,
    random_sorted_matrices,
)
from .metrics import error, mae, rmse
from .ols import OlsModel, ols_fit

__all__ = [
    "BaggedModel", "CVReport", "CoulombKernelModel", "OlsModel", "bagged_fit",
    "coulomb_matrix", "cross_validate_krr", "cross_validate_ols", "error", "krr_fit",
    "laplacian_kernel", "mae", "ols_fit", "random_sorted_matrices", "rmse", "split_sizes",
]
