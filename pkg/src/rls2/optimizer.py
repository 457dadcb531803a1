"""Alternating optimization for two-layer regularized least squares."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .kernels import KernelBank, alignments
from .simplex import solve_simplex_ls

logger = logging.getLogger(__name__)

# d_j at or below this counts as zero when reading off the support
SUPPORT_THRESHOLD = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Rls2Fit:
    """
    Coefficients of a fitted model for one value of ``lam``.

    ``history`` lists the objective at the starting point and after every
    outer iteration.
    """

    c: np.ndarray
    d: np.ndarray
    lam: float
    objective: float
    outer_iterations: int
    converged: bool
    s: np.ndarray
    history: List[float] = field(default_factory=list)

    @property
    def active_set(self) -> np.ndarray:
        return support(self.d)

    @property
    def w(self) -> np.ndarray:
        """Second-layer weights ``sqrt(d / s)``."""
        return np.sqrt(self.d / self.s)


@dataclass
class RegPath:
    lambdas: np.ndarray
    fits: List[Rls2Fit]
    n_kernels: List[int]
    iterations: List[int]
    wall_seconds: List[float]

    def write_csv(self, path, timing: bool = True, extra: Optional[dict] = None) -> None:
        """
        Write one row per lambda: lambda, objective, n_kernels,
        outer_iterations, wall_seconds, plus any ``extra`` columns. With
        ``timing=False`` the time column is written as 0 so that repeated
        runs produce identical files.
        """
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "objective", "n_kernels", "outer_iterations", "wall_seconds", *extra])
            for r, (lam, fit) in enumerate(zip(self.lambdas, self.fits)):
                secs = self.wall_seconds[r] if timing else 0.0
                w.writerow([repr(float(lam)), repr(fit.objective), self.n_kernels[r],
                            self.iterations[r], f"{secs:.6f}",
                            *(repr(float(col[r])) for col in extra.values())])


def support(d: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(d) > SUPPORT_THRESHOLD)


def assemble_R(bank: KernelBank, d) -> np.ndarray:
    """Combined kernel ``sum_k d_k R^k`` over the nonzero weights only."""
    d = np.asarray(d, dtype=float)
    R = np.zeros(bank.R.shape[1:])
    for k in np.flatnonzero(d):
        R += d[k] * bank.R[k]
    return R


def solve_c(R, y, lam: float, c0=None, delta: float = 1e-2, max_iter: Optional[int] = None) -> np.ndarray:
    """
    Conjugate gradient for ``(R + lam I) c = y``.

    Stops once ``||(R + lam I) c - y|| <= delta ||y||``. The residual is
    recomputed from scratch every 50 steps to keep rounding drift out of
    the stopping test. Raises :class:`ConvergenceError` after ``max_iter``
    (default ``10 l``) steps.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    R = np.asarray(R, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    c = np.zeros(n) if c0 is None else np.array(c0, dtype=float)

    def matvec(v):
        return R @ v + lam * v

    target = delta * np.linalg.norm(y)
    r = y - matvec(c)
    if np.linalg.norm(r) <= target:
        return c
    p = r.copy()
    rr = r @ r
    for k in range(1, max_iter + 1):
        Ap = matvec(p)
        alpha = rr / (p @ Ap)
        c += alpha * p
        if k % 50 == 0:
            r = y - matvec(c)
        else:
            r -= alpha * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= target:
            r = y - matvec(c)
            rr_new = r @ r
            if np.sqrt(rr_new) <= target:
                return c
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceError(
        f"CG did not reach relative residual {delta:g} in {max_iter} iterations "
        f"(lambda={lam:g}, residual={np.linalg.norm(y - matvec(c)) / max(np.linalg.norm(y), 1e-300):.3g})"
    )


def init_d(bank: KernelBank, y) -> Tuple[np.ndarray, np.ndarray]:
    """
    Large-lambda limit: all weight on the kernel best aligned with ``y``
    (smallest index on ties).
    """
    i = int(np.argmax(alignments(bank, y)))
    d = np.zeros(bank.m)
    d[i] = 1.0
    return d, np.array([i])


def build_subproblem(bank: KernelBank, c, lam: float, y) -> Tuple[np.ndarray, np.ndarray]:
    """Columns ``v_i = R^i c`` for every kernel and target ``u = y - lam c / 2``."""
    c = np.asarray(c, dtype=float)
    V = np.tensordot(bank.R, c, axes=([2], [0])).T
    u = np.asarray(y, dtype=float) - 0.5 * lam * c
    return V, u


def objective(bank: KernelBank, c, d, lam: float, y) -> float:
    """``1/2 ||y - R(d) c||^2 + lam/2 c' R(d) c``."""
    c = np.asarray(c, dtype=float)
    Rc = assemble_R(bank, d) @ c
    return float(0.5 * np.sum((np.asarray(y) - Rc) ** 2) + 0.5 * lam * (c @ Rc))


def _objective_from_Rc(Rc, c, lam, y) -> float:
    return float(0.5 * np.sum((y - Rc) ** 2) + 0.5 * lam * (c @ Rc))


def _c_step(R, y, lam, c_old, delta, cg_max_iter):
    """CG solve that never increases the objective over ``c_old``."""
    J_old = _objective_from_Rc(R @ c_old, c_old, lam, y)
    slack = 1e-12 * (1.0 + abs(J_old))
    tol = delta
    best, J_best = c_old, J_old
    for attempt in range(6):
        try:
            c = solve_c(R, y, lam, c_old, tol, cg_max_iter)
        except ConvergenceError:
            # failing at the requested tolerance is a real error; a tightened retry may fail
            if attempt == 0:
                raise
            break
        J = _objective_from_Rc(R @ c, c, lam, y)
        if J <= J_old + slack:
            return c
        if J < J_best:
            best, J_best = c, J
        tol *= 1e-2
        if tol < 1e-14:
            break
    return best


def fit(
    bank: KernelBank,
    y,
    lam: float,
    init: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    delta: float = 1e-2,
    outer_tol: float = 1e-10,
    max_outer: int = 200,
    smo_tol: float = 1e-8,
    cg_max_iter: Optional[int] = None,
) -> Rls2Fit:
    """
    Minimize ``1/2 ||y - R(d) c||^2 + lam/2 c' R(d) c`` over ``c`` and
    ``d`` on the simplex by alternating exact block updates.

    Each outer iteration solves the linear system for ``c`` with the
    current ``d`` (warm-started CG), then the simplex least-squares
    problem for ``d`` warm-started at the current ``d``. The loop stops
    when the new ``d`` leaves the linear system satisfied to ``delta``
    with the current ``c``, or when ``d`` moved by at most ``outer_tol``
    in l1 norm.

    Parameters
    ----------
    bank : KernelBank
    y : ndarray, shape (l,)
    lam : float
        Regularization parameter, > 0.
    init : (c0, d0), optional
        Warm start; defaults to ``c = 0`` and :func:`init_d`.
    delta : float
        Relative residual of the linear system.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    y = np.asarray(y, dtype=float)
    if y.shape != (bank.n_examples,):
        raise ValueError(f"y has shape {y.shape}, bank expects ({bank.n_examples},)")
    if init is None:
        c = np.zeros(bank.n_examples)
        d, _ = init_d(bank, y)
    else:
        c = np.array(init[0], dtype=float)
        d = np.array(init[1], dtype=float)
        if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
            raise ValueError("initial d is not on the simplex")
        d = np.clip(d, 0.0, None) / np.clip(d, 0.0, None).sum()

    y_norm = np.linalg.norm(y)
    R = assemble_R(bank, d)
    J = _objective_from_Rc(R @ c, c, lam, y)
    history = [J]
    converged = False
    it = 0
    while it < max_outer:
        it += 1
        c = _c_step(R, y, lam, c, delta, cg_max_iter)
        V, u = build_subproblem(bank, c, lam, y)
        rep = solve_simplex_ls(V, u, d0=d, tol=smo_tol)
        d_new = rep.d
        d_new[d_new <= SUPPORT_THRESHOLD] = 0.0
        d_new /= d_new.sum()
        step = float(np.abs(d_new - d).sum())
        d = d_new
        R = assemble_R(bank, d)
        Rc = R @ c
        J_new = _objective_from_Rc(Rc, c, lam, y)
        history.append(J_new)
        J = J_new
        resid = np.linalg.norm(Rc + lam * c - y)
        if resid <= delta * y_norm or step <= outer_tol:
            converged = True
            break
    if not converged:
        logger.warning("outer loop hit max_outer=%d at lambda=%g", max_outer, lam)
    return Rls2Fit(c, d, float(lam), J, it, converged, bank.s.copy(), history)


def default_lambda_grid(lo: float = 1e-6, hi: float = 1e6, n: int = 30) -> np.ndarray:
    """Descending log-spaced grid."""
    return np.logspace(np.log10(hi), np.log10(lo), n)


def fit_path(
    bank: KernelBank,
    y,
    lambdas: Optional[Sequence[float]] = None,
    delta: float = 1e-2,
    warm_start: bool = True,
    **fit_kw,
) -> RegPath:
    """
    Fit every lambda of a strictly decreasing grid, starting each fit from
    the previous solution (or cold, with ``warm_start=False``).
    """
    lambdas = default_lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ValueError("lambda grid must be a non-empty 1-d sequence")
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be positive and strictly decreasing")
    fits, n_k, iters, secs = [], [], [], []
    init = None
    for lam in lambdas:
        t0 = time.perf_counter()
        try:
            f = fit(bank, y, lam, init=init, delta=delta, **fit_kw)
        except Exception as exc:
            raise type(exc)(f"at lambda={lam:g}: {exc}") from exc
        secs.append(time.perf_counter() - t0)
        fits.append(f)
        n_k.append(int(f.active_set.size))
        iters.append(f.outer_iterations)
        if warm_start:
            init = (f.c, f.d)
    return RegPath(lambdas, fits, n_k, iters, secs)
