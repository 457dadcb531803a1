"""Cross-validated choice of the regularization parameter."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_io import Dataset, kfold, stratified_kfold
from .kernels import BasisKernelSpec, ScalingRule
from .model import mse, predict, sign_labels, train_path


@dataclass
class CvResult:
    """
    Validation curve over a lambda grid.

    ``scores`` has shape (k, n_lambda). ``metric`` is ``"mse"`` (lower is
    better) or ``"accuracy"`` (higher is better).
    """

    lambdas: np.ndarray
    scores: np.ndarray
    metric: str
    selected_lambda: float
    selected_index: int
    rule: str

    @property
    def mean(self) -> np.ndarray:
        return self.scores.mean(axis=0)

    @property
    def se(self) -> np.ndarray:
        k = self.scores.shape[0]
        return self.scores.std(axis=0, ddof=1) / np.sqrt(k)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", f"mean_{self.metric}", "std_error", "selected"])
            for i, lam in enumerate(self.lambdas):
                w.writerow([repr(float(lam)), repr(float(self.mean[i])),
                            repr(float(self.se[i])), int(i == self.selected_index)])


def select_lambda(lambdas, mean, se, rule: str = "one-se", higher_is_better: bool = False) -> int:
    """
    Index of the chosen lambda.

    ``"best"`` takes the largest lambda attaining the best mean score.
    ``"one-se"`` takes the largest lambda whose mean lies within one
    standard error (of the best point) of the best mean.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    score = np.asarray(mean, dtype=float)
    se = np.asarray(se, dtype=float)
    if higher_is_better:
        score = -score
    best = int(np.argmin(score))
    if rule == "best":
        ok = score <= score[best]
    elif rule == "one-se":
        ok = score <= score[best] + se[best]
    else:
        raise ValueError(f"unknown selection rule {rule!r}")
    cand = np.flatnonzero(ok)
    return int(cand[np.argmax(lambdas[cand])])


def path_outputs(train_ds: Dataset, X_val, specs, rule: ScalingRule, lambdas, delta: float = 1e-2,
                 transductive_X=None, **fit_kw) -> np.ndarray:
    """Real-valued outputs on ``X_val`` for every lambda, shape (n_lambda, n_val)."""
    test_X = transductive_X if rule.transductive else None
    if rule.transductive and test_X is None:
        test_X = X_val
    models, _, _ = train_path(train_ds, specs, rule, lambdas, delta=delta, test_X=test_X, **fit_kw)
    return np.stack([predict(m, X_val) for m in models])


def make_folds(ds: Dataset, k: int, seed: int, stratified: bool = True):
    if stratified and ds.task != "regression":
        return stratified_kfold(ds, k, seed)
    return kfold(ds.n_examples, k, seed)


def cross_validate(
    ds: Dataset,
    specs: Sequence[BasisKernelSpec],
    rule: ScalingRule,
    lambdas,
    k: int = 10,
    seed: int = 0,
    stratified: bool = True,
    selection: str = "one-se",
    delta: float = 1e-2,
    folds=None,
    **fit_kw,
) -> CvResult:
    """
    k-fold validation curve of a regression (MSE) or binary (accuracy)
    problem along a warm-started path on each fold.
    """
    if ds.task == "multiclass":
        raise ValueError("use rls2.ova.ova_cross_validate for multiclass data")
    lambdas = np.asarray(lambdas, dtype=float)
    if folds is None:
        folds = make_folds(ds, k, seed, stratified)
    scores = np.empty((len(folds), lambdas.size))
    for f, (tr, va) in enumerate(folds):
        out = path_outputs(ds.subset(tr), ds.X[va], specs, rule, lambdas, delta, **fit_kw)
        y_va = ds.y[va]
        if ds.task == "regression":
            scores[f] = [mse(y_va, o) for o in out]
        else:
            scores[f] = [np.mean(sign_labels(o) == y_va) for o in out]
    metric = "mse" if ds.task == "regression" else "accuracy"
    res = CvResult(lambdas, scores, metric, 0.0, 0, selection)
    i = select_lambda(lambdas, res.mean, res.se, selection, higher_is_better=metric == "accuracy")
    res.selected_index = i
    res.selected_lambda = float(lambdas[i])
    return res
