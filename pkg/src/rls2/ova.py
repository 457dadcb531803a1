"""One-versus-all multiclass classification."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .data_io import Dataset
from .kernels import BasisKernelSpec, ScalingRule
from .model import (
    FORMAT_VERSION,
    OVA_FORMAT,
    ModelFormatError,
    TrainedModel,
    _check_header,
    model_from_dict,
    model_to_dict,
    predict,
    train,
)
from .selection import CvResult, make_folds, path_outputs, select_lambda


@dataclass
class OvaModel:
    """One binary model per class (that class labelled +1, the rest -1)."""

    classes: List[str]
    models: List[TrainedModel]
    cv: Optional[List[CvResult]] = None

    def decision_function(self, X) -> np.ndarray:
        """Confidences, shape (n, n_classes)."""
        return np.column_stack([predict(m, X) for m in self.models])

    def predict(self, X) -> np.ndarray:
        return ova_predict(self, X)

    def predict_raw(self, X) -> np.ndarray:
        return np.argmax(np.column_stack([m.predict_raw(X) for m in self.models]), axis=1)

    def to_dict(self) -> dict:
        return {"format": OVA_FORMAT, "version": FORMAT_VERSION, "classes": list(self.classes),
                "models": [model_to_dict(m) for m in self.models]}

    @classmethod
    def from_dict(cls, obj) -> "OvaModel":
        _check_header(obj, OVA_FORMAT)
        try:
            models = [model_from_dict(m) for m in obj["models"]]
            classes = list(obj["classes"])
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed OVA record: {exc!r}") from exc
        if len(models) != len(classes):
            raise ModelFormatError("one model per class expected")
        return cls(classes, models)


def one_vs_rest(ds: Dataset, cls_id: int) -> Dataset:
    y = np.where(ds.y == cls_id, 1.0, -1.0)
    return replace(ds, y=y, task="binary", classes=["rest", _class_name(ds, cls_id)])


def _class_name(ds: Dataset, cls_id: int) -> str:
    return ds.classes[cls_id] if ds.classes else str(cls_id)


def ova_predict(model: OvaModel, X) -> np.ndarray:
    """Class id with the largest confidence; ties go to the smallest id."""
    return np.argmax(model.decision_function(X), axis=1)


def ova_cross_validate(
    ds: Dataset,
    specs: Sequence[BasisKernelSpec],
    rule: ScalingRule,
    lambdas,
    k: int = 8,
    seed: int = 0,
    selection: str = "best",
    delta: float = 1e-2,
    shared: bool = False,
    **fit_kw,
) -> List[CvResult]:
    """
    Stratified k-fold accuracy curves.

    Per-class mode returns one curve per binary problem, scored by binary
    accuracy. Shared mode returns a single curve scored by multiclass OVA
    accuracy.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    n_cls = _n_classes(ds)
    folds = make_folds(ds, k, seed, stratified=True)
    binary = np.empty((n_cls, len(folds), lambdas.size))
    multi = np.empty((len(folds), lambdas.size))
    for f, (tr, va) in enumerate(folds):
        sub = ds.subset(tr)
        conf = []
        for c in range(n_cls):
            if not np.any(sub.y == c):
                raise ValueError(f"class {_class_name(ds, c)} absent from a training fold")
            out = path_outputs(one_vs_rest(sub, c), ds.X[va], specs, rule, lambdas, delta, **fit_kw)
            y_va = np.where(ds.y[va] == c, 1.0, -1.0)
            binary[c, f] = np.mean(np.where(out >= 0, 1.0, -1.0) == y_va, axis=1)
            conf.append(out)
        pred = np.argmax(np.stack(conf, axis=-1), axis=-1)
        multi[f] = np.mean(pred == ds.y[va][None, :], axis=1)
    curves = [multi] if shared else list(binary)
    out = []
    for scores in curves:
        res = CvResult(lambdas, scores, "accuracy", 0.0, 0, selection)
        i = select_lambda(lambdas, res.mean, res.se, selection, higher_is_better=True)
        res.selected_index, res.selected_lambda = i, float(lambdas[i])
        out.append(res)
    return out


def _n_classes(ds: Dataset) -> int:
    if ds.task != "multiclass":
        raise ValueError("OVA needs a multiclass dataset")
    n = len(ds.classes) if ds.classes else int(ds.y.max()) + 1
    if n < 2:
        raise ValueError("need at least 2 classes")
    present = set(np.unique(ds.y).astype(int).tolist())
    missing = [c for c in range(n) if c not in present]
    if missing:
        raise ValueError(f"classes absent from training data: {[_class_name(ds, c) for c in missing]}")
    return n


def ova_fit(
    ds: Dataset,
    specs: Sequence[BasisKernelSpec],
    rule: ScalingRule,
    lam: Optional[float] = None,
    lambdas=None,
    k: int = 8,
    seed: int = 0,
    selection: str = "best",
    shared: bool = False,
    delta: float = 1e-2,
    test_X=None,
    **fit_kw,
) -> OvaModel:
    """
    Fit one binary model per class.

    With ``lam`` given every class uses it; otherwise lambda is chosen by
    stratified k-fold CV over ``lambdas``, per class (default) or shared
    across classes.
    """
    n_cls = _n_classes(ds)
    cv = None
    if lam is not None:
        lams = [float(lam)] * n_cls
    else:
        if lambdas is None:
            raise ValueError("give either lam or a lambda grid")
        cv = ova_cross_validate(ds, specs, rule, lambdas, k, seed, selection, delta, shared, **fit_kw)
        lams = [cv[0].selected_lambda] * n_cls if shared else [r.selected_lambda for r in cv]
    models = []
    for c in range(n_cls):
        model, _, _ = train(one_vs_rest(ds, c), specs, rule, lams[c], delta=delta,
                            test_X=test_X, intercept=0.0, **fit_kw)
        models.append(model)
    classes = list(ds.classes) if ds.classes else [str(c) for c in range(n_cls)]
    return OvaModel(classes, models, cv)
