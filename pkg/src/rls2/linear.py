"""Linear two-layer RLS: per-feature linear kernels and feature selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .kernels import KernelBank
from .optimizer import SUPPORT_THRESHOLD, Rls2Fit, RegPath


@dataclass
class LinearRls2Model:
    """
    Explicit linear predictor ``f(x) = a'x + intercept`` with
    ``a_j = d_j s_j z_j`` and ``z = X'c``.
    """

    a: np.ndarray
    z: np.ndarray
    d: np.ndarray
    s: np.ndarray
    intercept: float = 0.0

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.d > SUPPORT_THRESHOLD)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.a + self.intercept


def _feature_order(bank: KernelBank) -> np.ndarray:
    if any(sp.kind != "linear_feature" for sp in bank.specs):
        raise ValueError("bank must contain linear_feature kernels only")
    order = np.array([sp.feature for sp in bank.specs])
    N = bank.train_X.shape[1]
    # features dropped as degenerate at bank build time simply stay at zero weight
    if len(set(order.tolist())) != order.size or order.min() < 0 or order.max() >= N:
        raise ValueError("linear bank must list each feature at most once")
    if any(c is not None for c in bank.centering):
        raise ValueError("linear model extraction needs an uncentered bank")
    return order


def extract_linear_model(fit: Rls2Fit, bank: KernelBank, intercept: float = 0.0) -> LinearRls2Model:
    """Read the feature weights off a fit on a per-feature linear bank."""
    order = _feature_order(bank)
    N = bank.train_X.shape[1]
    d = np.zeros(N)
    s = np.zeros(N)
    d[order] = fit.d
    s[order] = bank.s
    d[d <= SUPPORT_THRESHOLD] = 0.0
    z = bank.train_X.T @ fit.c
    a = d * s * z
    return LinearRls2Model(a, z, d, s, float(intercept))


def _selected_design(X, d, s):
    X = np.asarray(X, dtype=float)
    d = np.asarray(d, dtype=float)
    s = np.asarray(s, dtype=float)
    sel = np.flatnonzero(d > SUPPORT_THRESHOLD)
    gamma = s[sel] * d[sel]
    return sel, X[:, sel] * gamma, gamma


def scaled_ridge_solution(X, d, s, y, lam: float):
    """
    Coefficients on the selected features for fixed ``d``:
    ``z~ = (H~'H~ + lam G~)^{-1} H~'y`` with ``G~ = diag(s_j d_j)`` and
    ``H~ = X_sel G~``. Returns ``(selected, z~)``; training predictions
    are ``H~ z~``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    sel, Ht, gamma = _selected_design(X, d, s)
    A = Ht.T @ Ht + lam * np.diag(gamma)
    zt = np.linalg.solve(A, Ht.T @ np.asarray(y, dtype=float))
    return sel, zt


def degrees_of_freedom(X, d, s, lam: float) -> float:
    """
    ``tr(H~ (H~'H~ + lam G~)^{-1} H~')`` on the selected features; lies in
    ``[0, n(d)]``. ``lam = 0`` is accepted when ``H~'H~`` is nonsingular.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    sel, Ht, gamma = _selected_design(X, d, s)
    if sel.size == 0:
        return 0.0
    G = Ht.T @ Ht
    A = G + lam * np.diag(gamma)
    if lam == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise np.linalg.LinAlgError("singular system at lambda = 0")
    # tr(H (A)^{-1} H') = tr(A^{-1} G)
    return float(np.trace(np.linalg.solve(A, G)))


def coefficient_profile(path: RegPath, bank: KernelBank, intercept: float = 0.0):
    """Per-lambda ``(lam, df, a)`` along a path on a linear bank."""
    rows = []
    for lam, f in zip(path.lambdas, path.fits):
        model = extract_linear_model(f, bank, intercept)
        df = degrees_of_freedom(bank.train_X, model.d, model.s, lam)
        rows.append((float(lam), df, model.a))
    return rows


def write_coefficient_profile(path, rows, feature_names: Optional[Sequence[str]] = None) -> None:
    N = rows[0][2].size if rows else 0
    names = list(feature_names) if feature_names is not None else [f"a_{j + 1}" for j in range(N)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "df", *names])
        for lam, df, a in rows:
            w.writerow([repr(lam), repr(df), *(repr(float(v)) for v in a)])
