"""Synthetic sparse linear problem on random binary strings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import ScalingRule, build_bank, linear_specs
from .linear import LinearRls2Model, extract_linear_model
from .model import rmse
from .optimizer import RegPath, default_lambda_grid, fit_path

N_STRINGS = 250
N_BITS = 100
N_POOL = 150


def binary_strings(seed: int, sigma: float = 0.01, n: int = N_STRINGS, bits: int = N_BITS):
    """
    Bernoulli(1/2) bit strings with target ``x^1 + x^2 + x^3`` plus
    Gaussian noise of standard deviation ``sigma``.
    """
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, bits)).astype(float)
    y = X[:, :3].sum(axis=1) + sigma * rng.standard_normal(n)
    return X, y


@dataclass
class SynthReport:
    n_train: int
    sigma: float
    lambdas: np.ndarray
    test_rmse: np.ndarray
    best_index: int
    path: RegPath
    best_model: LinearRls2Model

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.best_index])

    @property
    def best_rmse(self) -> float:
        return float(self.test_rmse[self.best_index])

    @property
    def best_d(self) -> np.ndarray:
        return self.best_model.d


def run_binary_strings(seed: int = 0, n_train: int = N_POOL, sigma: float = 0.01,
                       lambdas=None, delta: float = 1e-2) -> SynthReport:
    """
    Fit linear two-layer RLS on the first ``n_train`` strings (inverse
    squared feature norm scaling, no centering, no intercept) along a
    warm-started path and score every lambda on the last 100 strings.
    The best lambda is the one with lowest test RMSE.
    """
    if not 1 <= n_train <= N_POOL:
        raise ValueError(f"n_train must be in [1, {N_POOL}]")
    X, y = binary_strings(seed, sigma)
    X_tr, y_tr = X[:n_train], y[:n_train]
    X_te, y_te = X[N_POOL:], y[N_POOL:]
    bank = build_bank(X_tr, linear_specs(X.shape[1]), ScalingRule("feature_norm_inverse"))
    lambdas = default_lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    path = fit_path(bank, y_tr, lambdas, delta=delta)
    models = [extract_linear_model(f, bank) for f in path.fits]
    errs = np.array([rmse(y_te, m.predict(X_te)) for m in models])
    best = int(np.argmin(errs))
    return SynthReport(n_train, sigma, lambdas, errs, best, path, models[best])
