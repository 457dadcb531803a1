"""Command-line interface: ``rls2 {train,path,cv,predict,synth}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .data_io import Dataset, align_features, load_csv, standardize
from .kernels import ScalingRule, default_benchmark_specs, linear_specs, load_specs
from .linear import coefficient_profile, write_coefficient_profile
from .model import accuracy, load_model, predict, rmse, save_model, sign_labels, train, train_path
from .optimizer import default_lambda_grid, fit
from .ova import OvaModel, ova_fit
from .selection import cross_validate
from .synth import run_binary_strings

TASK_ALIASES = {"reg": "regression", "regression": "regression", "class": "binary",
                "binary": "binary", "multiclass": "multiclass"}
SCALING_ALIASES = {
    "unit": "unit",
    "trace": "trace_inverse",
    "trace-centered": "trace_inverse_centered",
    "feature-norm": "feature_norm_inverse",
    "fisher": "fisher",
    "fisher-nl": "fisher_nonlinear",
    "fisher-sqrt": "fisher_sqrt",
}


@dataclass
class RunConfig:
    command: str
    data: Optional[str] = None
    test_data: Optional[str] = None
    target: Optional[str] = None
    task: str = "regression"
    kernels: str = "default"
    scaling: str = "trace_inverse"
    transductive: bool = False
    standardize: bool = False
    lam: Optional[float] = None
    lambdas: Optional[np.ndarray] = None
    delta: float = 1e-2
    folds: int = 10
    stratified: bool = False
    selection: str = "one-se"
    seed: int = 0
    out: Optional[str] = None
    delimiter: str = ","
    header: bool = True

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("--delta must be positive")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("--lambda must be positive")
        if self.lambdas is not None and np.any(self.lambdas <= 0):
            raise ValueError("--lambda-grid values must be positive")

    @property
    def rule(self) -> ScalingRule:
        return ScalingRule(self.scaling, self.transductive)


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` -> n log-spaced values from hi down to lo."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}")
    if not (0 < lo <= hi and n >= 1) or (n > 1 and lo == hi):
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return default_lambda_grid(lo, hi, n) if n > 1 else np.array([hi])


def _specs(cfg: RunConfig, n_features: int):
    if cfg.kernels == "default":
        return default_benchmark_specs(n_features)
    if cfg.kernels == "linear":
        return linear_specs(n_features)
    return load_specs(cfg.kernels)


def _load(cfg: RunConfig, path=None) -> Dataset:
    if cfg.target is None:
        raise ValueError("--target is required")
    return load_csv(path or cfg.data, cfg.target, cfg.task, cfg.delimiter, cfg.header)


def _prepare(cfg: RunConfig):
    """Training set, optional test set, standardizer."""
    ds = _load(cfg)
    test = _load(cfg, cfg.test_data) if cfg.test_data else None
    if test is not None:
        test = replace(test, X=align_features(test, ds.feature_names),
                       feature_names=ds.feature_names)
    st = None
    if cfg.standardize:
        st, ds_std, others = standardize(ds, [test] if test is not None else [], center_output=False)
        ds = ds_std
        test = others[0] if others else None
    if cfg.transductive and test is None:
        raise ValueError("--transductive needs --test-data")
    return ds, test, st


def _score(task, y, f):
    if task == "regression":
        return "test_rmse", rmse(y, f)
    return "test_accuracy", accuracy(y, sign_labels(f))


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_train(cfg: RunConfig) -> dict:
    ds, test, st = _prepare(cfg)
    specs = _specs(cfg, ds.n_features)
    test_X = test.X if cfg.transductive else None
    t0 = time.perf_counter()
    if ds.task == "multiclass":
        model = ova_fit(ds, specs, cfg.rule, lam=cfg.lam,
                        lambdas=cfg.lambdas if cfg.lambdas is not None else default_lambda_grid(),
                        k=cfg.folds, seed=cfg.seed, selection=cfg.selection,
                        delta=cfg.delta, test_X=test_X)
        for m in model.models:
            m.standardizer = st
            m.feature_names = list(ds.feature_names)
        summary = {"classes": len(model.classes),
                   "lambda": [m.lam for m in model.models],
                   "n_kernels": [int(m.active_set.size) for m in model.models]}
    else:
        if cfg.lam is None:
            raise ValueError("--lambda is required for train")
        model, f, _ = train(ds, specs, cfg.rule, cfg.lam, delta=cfg.delta, test_X=test_X)
        model.standardizer = st
        summary = {"lambda": cfg.lam, "objective": f.objective,
                   "n_kernels": int(f.active_set.size), "m": len(specs),
                   "outer_iterations": f.outer_iterations, "converged": f.converged}
    summary["wall_seconds"] = round(time.perf_counter() - t0, 6)
    if test is not None:
        if ds.task == "multiclass":
            summary["test_accuracy"] = accuracy(test.y, model.predict(test.X))
        else:
            key, val = _score(ds.task, test.y, predict(model, test.X))
            summary[key] = val
    if cfg.out:
        save_model(model, cfg.out)
    return summary


def cmd_path(cfg: RunConfig, models_dir=None, coef_out=None, refit_check=False,
             timing=True) -> dict:
    if cfg.task == "multiclass":
        raise ValueError("path is defined for regression and binary tasks")
    ds, test, st = _prepare(cfg)
    specs = _specs(cfg, ds.n_features)
    lambdas = cfg.lambdas if cfg.lambdas is not None else (
        np.array([cfg.lam]) if cfg.lam is not None else default_lambda_grid())
    test_X = test.X if cfg.transductive else None
    models, path, bank = train_path(ds, specs, cfg.rule, lambdas, delta=cfg.delta, test_X=test_X)
    extra = {}
    if test is not None:
        scores = [_score(ds.task, test.y, predict(m, test.X)) for m in models]
        extra[scores[0][0]] = [s[1] for s in scores]
    if refit_check:
        y = ds.y - models[0].intercept
        extra["cold_objective"] = [fit(bank, y, lam, delta=cfg.delta).objective for lam in lambdas]
    if cfg.out:
        path.write_csv(cfg.out, timing=timing, extra=extra)
    if models_dir:
        Path(models_dir).mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(models):
            m.standardizer = st
            save_model(m, Path(models_dir) / f"model_{i:03d}.json")
    if coef_out:
        rows = coefficient_profile(path, bank, models[0].intercept)
        write_coefficient_profile(coef_out, rows, ds.feature_names)
    return {"n_lambdas": int(lambdas.size),
            "total_outer_iterations": int(sum(path.iterations)),
            "wall_seconds": round(float(sum(path.wall_seconds)), 6) if timing else 0.0}


def cmd_cv(cfg: RunConfig) -> dict:
    if cfg.task == "multiclass":
        raise ValueError("cv is defined for regression and binary tasks; "
                         "multiclass train runs OVA cross-validation itself")
    ds, test, _ = _prepare(cfg)
    specs = _specs(cfg, ds.n_features)
    lambdas = cfg.lambdas if cfg.lambdas is not None else default_lambda_grid()
    res = cross_validate(ds, specs, cfg.rule, lambdas, k=cfg.folds, seed=cfg.seed,
                         stratified=cfg.stratified, selection=cfg.selection, delta=cfg.delta)
    if cfg.out:
        res.write_csv(cfg.out)
    return {"selected_lambda": res.selected_lambda, "metric": res.metric, "selection": res.rule}


def cmd_predict(model_path, data, out, target=None, delimiter=",", header=True) -> dict:
    model = load_model(model_path)
    first = model.models[0] if isinstance(model, OvaModel) else model
    ds = load_csv(data, target, first.task if target is not None else "regression",
                  delimiter, header)
    if first.feature_names:
        X = align_features(ds, first.feature_names)
    else:
        X = ds.X
    if first.standardizer is not None:
        X = first.standardizer.transform(X)
    if isinstance(model, OvaModel):
        conf = model.decision_function(X)
        cls = np.argmax(conf, axis=1)
        pred = conf[np.arange(cls.size), cls]
        labels = [model.classes[c] for c in cls]
    else:
        pred = predict(model, X)
        labels = None
        if model.task == "binary":
            names = model.classes or ["-1", "1"]
            labels = [names[1] if v > 0 else names[0] for v in sign_labels(pred)]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "prediction"] + (["label"] if labels is not None else []))
        for i, p in enumerate(pred):
            w.writerow([i, repr(float(p))] + ([labels[i]] if labels is not None else []))
    return {"n": int(len(pred))}


def cmd_synth(seed: int, n_train: int, sigma: float, delta: float, lambdas=None,
              out=None, path_out=None, timing=True) -> dict:
    rep = run_binary_strings(seed, n_train, sigma, lambdas, delta)
    d = rep.best_d
    report = {
        "seed": seed, "n_train": n_train, "sigma": sigma,
        "best_lambda": rep.best_lambda, "best_test_rmse": rep.best_rmse,
        "selected_features": [int(j) for j in np.flatnonzero(d)],
        "d_first_three": [float(v) for v in d[:3]],
        "d_rest_sum": float(d[3:].sum()),
    }
    if out:
        Path(out).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    if path_out:
        rep.path.write_csv(path_out, timing=timing, extra={"test_rmse": rep.test_rmse})
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rls2", description="Regularized least squares with two layers")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--data", required=True)
        sp.add_argument("--test-data")
        sp.add_argument("--target", required=True)
        sp.add_argument("--task", choices=sorted(TASK_ALIASES), default="reg")
        sp.add_argument("--kernels", default="default",
                        help="'default', 'linear' or a JSON kernel spec file")
        sp.add_argument("--scaling", choices=sorted(SCALING_ALIASES), default="trace")
        sp.add_argument("--transductive", action="store_true")
        sp.add_argument("--standardize", action="store_true")
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--lambda-grid", type=parse_grid)
        sp.add_argument("--delta", type=float, default=1e-2)
        sp.add_argument("--folds", type=int, default=10)
        sp.add_argument("--stratified", action="store_true")
        sp.add_argument("--select", dest="selection", choices=["one-se", "best"], default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--delimiter", default=",")
        sp.add_argument("--no-header", action="store_true")
        sp.add_argument("--out")

    data_args(sub.add_parser("train", help="fit one lambda (OVA with CV for multiclass)"))
    sp = sub.add_parser("path", help="warm-started regularization path")
    data_args(sp)
    sp.add_argument("--models-dir")
    sp.add_argument("--coef-out", help="coefficient profile CSV (linear kernels)")
    sp.add_argument("--refit-check", action="store_true",
                    help="add a cold-start objective column")
    sp.add_argument("--no-timing", action="store_true")
    data_args(sub.add_parser("cv", help="k-fold validation curve and lambda choice"))

    sp = sub.add_parser("predict", help="apply a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--target")
    sp.add_argument("--delimiter", default=",")
    sp.add_argument("--no-header", action="store_true")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("synth", help="binary strings feature selection experiment")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-train", type=int, default=150)
    sp.add_argument("--sigma", type=float, default=0.01)
    sp.add_argument("--delta", type=float, default=1e-2)
    sp.add_argument("--lambda-grid", type=parse_grid)
    sp.add_argument("--out")
    sp.add_argument("--path-out")
    sp.add_argument("--no-timing", action="store_true")
    return p


def _config(args) -> RunConfig:
    selection = args.selection or ("best" if args.task == "multiclass" else "one-se")
    return RunConfig(
        command=args.command, data=args.data, test_data=args.test_data, target=args.target,
        task=TASK_ALIASES[args.task], kernels=args.kernels,
        scaling=SCALING_ALIASES[args.scaling], transductive=args.transductive,
        standardize=args.standardize, lam=args.lam, lambdas=args.lambda_grid,
        delta=args.delta, folds=args.folds, stratified=args.stratified, selection=selection,
        seed=args.seed, out=args.out, delimiter=args.delimiter, header=not args.no_header,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "predict":
            res = cmd_predict(args.model, args.data, args.out, args.target,
                              args.delimiter, not args.no_header)
        elif args.command == "synth":
            if not 1 <= args.n_train <= 150:
                raise ValueError("--n-train must be in [1, 150]")
            res = cmd_synth(args.seed, args.n_train, args.sigma, args.delta, args.lambda_grid,
                            args.out, args.path_out, timing=not args.no_timing)
        else:
            cfg = _config(args)
            if args.command == "train":
                res = cmd_train(cfg)
            elif args.command == "path":
                res = cmd_path(cfg, args.models_dir, args.coef_out, args.refit_check,
                               timing=not args.no_timing)
            else:
                res = cmd_cv(cfg)
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    _emit(res)
    return 0


if __name__ == "__main__":
    sys.exit(main())
