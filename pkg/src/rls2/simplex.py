"""Least squares over the standard simplex by pairwise (SMO-style) updates."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

# Q = V'V is cached when m is at most this size.
GRAM_CACHE_LIMIT = 2000


@dataclass
class SimplexLsReport:
    """
    Result of :func:`solve_simplex_ls`.

    ``history`` holds the objective after every pair update (first entry is
    the starting objective) when tracing was requested.
    """

    d: np.ndarray
    objective: float
    kkt_violation: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.d > 0)


def _violation(g: np.ndarray, d: np.ndarray) -> float:
    return max(0.0, float(g[d > 0].max() - g.min()))


def kkt_violation(V, u, d) -> float:
    """
    ``max_{i: d_i > 0} g_i - min_j g_j`` with ``g = 2 V'(Vd - u)``.

    Zero exactly at the minimizers of ``||Vd - u||^2`` over the simplex.
    """
    V = np.asarray(V, dtype=float)
    d = np.asarray(d, dtype=float)
    g = 2.0 * V.T @ (V @ d - np.asarray(u, dtype=float))
    return _violation(g, d)


def _check_start(d0: np.ndarray, m: int) -> np.ndarray:
    d = np.asarray(d0, dtype=float).copy()
    if d.shape != (m,):
        raise ValueError(f"warm start has shape {d.shape}, expected ({m},)")
    if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
        raise ValueError("warm start is not on the simplex")
    d[d < 0] = 0.0
    return d / d.sum()


def solve_simplex_ls(
    V,
    u,
    d0=None,
    tol: float = 1e-8,
    max_iter: Optional[int] = None,
    trace: bool = False,
    trace_path=None,
) -> SimplexLsReport:
    """
    Minimize ``||V d - u||^2`` subject to ``d >= 0, sum(d) = 1``.

    Every step moves mass from the coordinate ``i`` with the largest
    gradient among the positive ones to a coordinate ``j`` with a smaller
    gradient, picked by the largest guaranteed decrease, using the exact
    line minimizer clipped to ``[0, d_i]``. Coordinates sitting at zero with
    a gradient above every active gradient are shrunk out of the search and
    restored before convergence is declared.

    Parameters
    ----------
    V : ndarray, shape (l, m)
    u : ndarray, shape (l,)
    d0 : ndarray, optional
        Feasible warm start; defaults to the best vertex.
    tol : float
        Target KKT violation (see :func:`kkt_violation`).
    max_iter : int, optional
        Cap on pair updates, default ``100 * m`` (at least 1000).
    trace : bool
        Record the objective after every update in ``history``.
    trace_path : path-like, optional
        Write a per-update CSV (iteration, objective, violation) there.
    """
    V = np.asarray(V, dtype=float)
    u = np.asarray(u, dtype=float)
    if V.ndim != 2 or u.shape != (V.shape[0],):
        raise ValueError("V must be (l, m) and u of length l")
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(u))):
        raise ValueError("non-finite entries in V or u")
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = V.shape[1]
    if max_iter is None:
        max_iter = max(1000, 100 * m)

    cached = m <= GRAM_CACHE_LIMIT
    if cached:
        Q = V.T @ V
        diagQ = np.diag(Q).copy()
    else:
        diagQ = np.einsum("ij,ij->j", V, V)
    b = V.T @ u

    if d0 is None:
        # best vertex: f(e_k) = Q_kk - 2 b_k + const
        d = np.zeros(m)
        d[int(np.argmin(diagQ - 2.0 * b))] = 1.0
    else:
        d = _check_start(d0, m)

    def full_gradient(d):
        return 2.0 * (V.T @ (V @ d) - b)

    def column(k):
        return Q[:, k] if cached else V.T @ V[:, k]

    g = full_gradient(d)
    f = float(np.sum((V @ d - u) ** 2))
    history = [f] if (trace or trace_path) else []
    rows = [(0, f, _violation(g, d))] if trace_path else []
    working = np.ones(m, dtype=bool)
    it = 0

    while True:
        pos = d > 0
        if g[pos].max() - g[working].min() <= tol:
            # confirm on a fresh gradient with every coordinate restored
            g = full_gradient(d)
            working[:] = True
            if _violation(g, d) <= tol:
                break
            continue
        if it >= max_iter:
            break

        cand_i = np.flatnonzero(pos)
        i = int(cand_i[np.argmax(g[cand_i])])
        Qi = column(i)
        diff = g[i] - g
        eta = diagQ[i] + diagQ - 2.0 * Qi
        ok = working & (diff > 0)
        ok[i] = False
        cand = np.flatnonzero(ok)
        eta_c = np.maximum(eta[cand], 1e-300)
        # decrease of an unclipped step is diff^2 / (4 eta); clip to d_i
        t_c = np.minimum(diff[cand] / (2.0 * eta_c), d[i])
        gain = t_c * diff[cand] - t_c**2 * eta[cand]
        j = int(cand[np.argmax(gain)])
        t = float(t_c[np.argmax(gain)])
        if not t > 0:
            break
        if t >= d[i]:
            t = d[i]
            d[j] += d[i]
            d[i] = 0.0
        else:
            d[i] -= t
            d[j] += t
        f = f - t * diff[j] + t * t * eta[j]
        g += 2.0 * t * (column(j) - Qi)
        it += 1

        if it % m == 0:
            # shrink zero coordinates that cannot enter the support
            g = full_gradient(d)
            pos = d > 0
            working = pos | (g <= g[pos].max())
        if history:
            history.append(f)
        if trace_path:
            rows.append((it, f, _violation(g, d)))

    d[d < 0] = 0.0
    d /= d.sum()
    objective = float(np.sum((V @ d - u) ** 2))
    viol = kkt_violation(V, u, d)
    if trace_path:
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "kkt_violation"])
            w.writerows((r[0], repr(r[1]), repr(r[2])) for r in rows)
    return SimplexLsReport(d, objective, viol, it, viol <= tol, history)
