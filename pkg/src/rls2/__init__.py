"""Regularized least squares with two layers (multiple kernel learning)."""

__version__ = "0.1.0"

from .data_io import Dataset, Standardizer, load_csv, split, standardize, stratified_kfold
from .kernels import (
    BasisKernelSpec,
    KernelBank,
    ScalingRule,
    build_bank,
    default_benchmark_specs,
    linear_specs,
)
from .linear import LinearRls2Model, degrees_of_freedom, extract_linear_model, scaled_ridge_solution
from .model import TrainedModel, accuracy, load_model, predict, predict_class, rmse, save_model, train
from .optimizer import Rls2Fit, RegPath, default_lambda_grid, fit, fit_path
from .ova import OvaModel, ova_fit, ova_predict
from .selection import cross_validate
from .simplex import kkt_violation, solve_simplex_ls

__all__ = [
    "BasisKernelSpec", "Dataset", "KernelBank", "LinearRls2Model", "OvaModel", "RegPath",
    "Rls2Fit", "ScalingRule", "Standardizer", "TrainedModel", "accuracy", "build_bank",
    "cross_validate", "default_benchmark_specs", "default_lambda_grid", "degrees_of_freedom",
    "extract_linear_model", "fit", "fit_path", "kkt_violation", "linear_specs", "load_csv",
    "load_model", "ova_fit", "ova_predict", "predict", "predict_class", "rmse", "save_model",
    "scaled_ridge_solution", "solve_simplex_ls", "split", "standardize", "stratified_kfold",
    "train",
]
