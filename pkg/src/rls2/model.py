"""Trained models: prediction, decision rules, metrics and persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .data_io import Dataset, Standardizer
from .kernels import (
    BasisKernelSpec,
    Centering,
    KernelBank,
    ScalingRule,
    build_bank,
    cross_kernel_rows,
)
from .optimizer import Rls2Fit, fit as rls2_fit, fit_path

MODEL_FORMAT = "rls2-model"
OVA_FORMAT = "rls2-ova"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass
class TrainedModel:
    """
    Everything needed to evaluate
    ``f(x) = sum_k d_k s_k sum_j c_j K_k(x_j, x) + intercept``.

    ``standardizer`` (optional) is applied to raw inputs by
    :meth:`predict_raw`; :func:`predict` expects already transformed inputs.
    """

    specs: List[BasisKernelSpec]
    s: np.ndarray
    centering: List[Optional[Centering]]
    train_X: np.ndarray
    c: np.ndarray
    d: np.ndarray
    lam: float
    intercept: float = 0.0
    task: str = "regression"
    standardizer: Optional[Standardizer] = None
    classes: Optional[List[str]] = None
    feature_names: Optional[List[str]] = None

    @classmethod
    def from_fit(cls, bank: KernelBank, fit: Rls2Fit, intercept: float = 0.0,
                 task: str = "regression", **kw) -> "TrainedModel":
        return cls(list(bank.specs), bank.s.copy(), list(bank.centering), bank.train_X,
                   fit.c.copy(), fit.d.copy(), float(fit.lam), float(intercept), task, **kw)

    @property
    def n_features(self) -> int:
        return self.train_X.shape[1]

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.d > 0)

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def predict_raw(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return predict(self, X)


def predict(model: TrainedModel, X) -> np.ndarray:
    """Real-valued outputs on (already preprocessed) inputs ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    out = np.full(X.shape[0], model.intercept)
    for k in model.active_set:
        rows = cross_kernel_rows(model.specs[k], model.s[k], model.train_X, X, model.centering[k])
        out += model.d[k] * (model.c @ rows)
    return out


def sign_labels(f) -> np.ndarray:
    """Sign with ties at exactly zero sent to +1."""
    f = np.asarray(f, dtype=float)
    return np.where(f >= 0, 1.0, -1.0)


def predict_class(model: TrainedModel, X) -> np.ndarray:
    if model.task != "binary":
        raise ValueError(f"predict_class needs a binary model, got task {model.task!r}")
    return sign_labels(predict(model, X))


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def accuracy(labels, predicted) -> float:
    labels, predicted = _pair(labels, predicted)
    return float(np.mean(labels == predicted))


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError("length mismatch")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def train(
    ds: Dataset,
    specs: Sequence[BasisKernelSpec],
    rule: ScalingRule,
    lam: float,
    delta: float = 1e-2,
    test_X=None,
    intercept: Optional[float] = None,
    **fit_kw,
):
    """
    Build the bank on ``ds`` and fit one lambda.

    For regression the target mean is used as intercept (unless given)
    and subtracted before fitting. Returns ``(model, fit, bank)``.
    """
    if intercept is None:
        intercept = float(ds.y.mean()) if ds.task == "regression" else 0.0
    y = ds.y - intercept
    labels = ds.y if ds.task == "binary" else None
    bank = build_bank(ds.X, specs, rule, y=labels, test_X=test_X)
    f = rls2_fit(bank, y, lam, delta=delta, **fit_kw)
    model = TrainedModel.from_fit(bank, f, intercept, ds.task, classes=ds.classes,
                                  feature_names=list(ds.feature_names))
    return model, f, bank


def train_path(ds: Dataset, specs, rule: ScalingRule, lambdas, delta: float = 1e-2,
               test_X=None, intercept: Optional[float] = None, **fit_kw):
    """Warm-started path; returns ``(models, path, bank)``."""
    if intercept is None:
        intercept = float(ds.y.mean()) if ds.task == "regression" else 0.0
    labels = ds.y if ds.task == "binary" else None
    bank = build_bank(ds.X, specs, rule, y=labels, test_X=test_X)
    path = fit_path(bank, ds.y - intercept, lambdas, delta=delta, **fit_kw)
    models = [TrainedModel.from_fit(bank, f, intercept, ds.task, classes=ds.classes,
                                    feature_names=list(ds.feature_names))
              for f in path.fits]
    return models, path, bank


# ---------------------------------------------------------------- persistence

def _hex(a) -> list:
    return [float(v).hex() for v in np.asarray(a, dtype=float).ravel()]


def _unhex(values, shape=None) -> np.ndarray:
    out = np.array([float.fromhex(v) for v in values], dtype=float)
    return out.reshape(shape) if shape is not None else out


def _standardizer_to_dict(st: Optional[Standardizer]):
    if st is None:
        return None
    return {"mean": _hex(st.mean), "std": _hex(st.std),
            "constant": [bool(v) for v in st.constant],
            "output_intercept": float(st.output_intercept).hex()}


def _standardizer_from_dict(obj) -> Optional[Standardizer]:
    if obj is None:
        return None
    return Standardizer(_unhex(obj["mean"]), _unhex(obj["std"]),
                        np.array(obj["constant"], dtype=bool),
                        float.fromhex(obj["output_intercept"]))


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "task": model.task,
        "lambda": float(model.lam).hex(),
        "intercept": float(model.intercept).hex(),
        "kernels": [sp.to_dict() for sp in model.specs],
        "s": _hex(model.s),
        "centering": [None if ce is None else
                      {"col_mean": _hex(ce.col_mean), "grand_mean": float(ce.grand_mean).hex()}
                      for ce in model.centering],
        "train_X": {"shape": list(model.train_X.shape), "data": _hex(model.train_X)},
        "c": _hex(model.c),
        "d": _hex(model.d),
        "standardizer": _standardizer_to_dict(model.standardizer),
        "classes": model.classes,
        "feature_names": model.feature_names,
    }


def model_from_dict(obj: dict) -> TrainedModel:
    _check_header(obj, MODEL_FORMAT)
    try:
        tx = obj["train_X"]
        model = TrainedModel(
            specs=[BasisKernelSpec.from_dict(k) for k in obj["kernels"]],
            s=_unhex(obj["s"]),
            centering=[None if ce is None else
                       Centering(_unhex(ce["col_mean"]), float.fromhex(ce["grand_mean"]))
                       for ce in obj["centering"]],
            train_X=_unhex(tx["data"], tuple(tx["shape"])),
            c=_unhex(obj["c"]),
            d=_unhex(obj["d"]),
            lam=float.fromhex(obj["lambda"]),
            intercept=float.fromhex(obj["intercept"]),
            task=obj["task"],
            standardizer=_standardizer_from_dict(obj.get("standardizer")),
            classes=obj.get("classes"),
            feature_names=obj.get("feature_names"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model record: {exc!r}") from exc
    m = len(model.specs)
    if not (model.s.size == model.d.size == len(model.centering) == m
            and model.c.size == model.train_X.shape[0]):
        raise ModelFormatError("inconsistent array sizes in model record")
    return model


def _check_header(obj, expected):
    if not isinstance(obj, dict) or obj.get("format") != expected:
        raise ModelFormatError(f"not an {expected} record")
    if obj.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported {expected} version {obj.get('version')!r} (expected {FORMAT_VERSION})"
        )


def dumps(model) -> str:
    obj = model_to_dict(model) if isinstance(model, TrainedModel) else model.to_dict()
    return json.dumps(obj, indent=1) + "\n"


def save_model(model, path) -> None:
    """Write a :class:`TrainedModel` or OVA model as versioned JSON (floats in hex)."""
    Path(path).write_text(dumps(model))


def load_model(path):
    """Inverse of :func:`save_model`; returns a TrainedModel or OvaModel."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from exc
    if isinstance(obj, dict) and obj.get("format") == OVA_FORMAT:
        from .ova import OvaModel
        return OvaModel.from_dict(obj)
    return model_from_dict(obj)
