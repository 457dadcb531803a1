import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rls2.simplex import kkt_violation, solve_simplex_ls


def grid_minimum(V, u, step=1e-3):
    """Minimum of ||Vd - u||^2 over a regular grid of the 3-simplex."""
    n = int(round(1 / step))
    i, j = np.triu_indices(n + 1)
    # (a, b, c) = (i, j - i, n - j) / n enumerates every grid point once
    D = np.stack([i, j - i, n - j], axis=1) / n
    r = D @ V.T - u
    return float(np.min(np.einsum("ij,ij->i", r, r)))


def loop_kkt(V, u, d):
    ell, m = V.shape
    r = [sum(V[i, k] * d[k] for k in range(m)) - u[i] for i in range(ell)]
    g = [2 * sum(V[i, k] * r[i] for i in range(ell)) for k in range(m)]
    return max(0.0, max(g[k] for k in range(m) if d[k] > 0) - min(g))


class TestExamples:
    def test_singleton(self, rng):
        rep = solve_simplex_ls(rng.standard_normal((4, 1)), rng.standard_normal(4))
        np.testing.assert_array_equal(rep.d, [1.0])
        assert rep.kkt_violation == 0.0

    def test_vertex_optimum(self):
        rep = solve_simplex_ls(np.eye(2), [1.0, 0.0])
        np.testing.assert_allclose(rep.d, [1, 0])
        assert rep.objective == pytest.approx(0, abs=1e-14)
        assert kkt_violation(np.eye(2), [1.0, 0.0], rep.d) <= 1e-10

    def test_interior_optimum(self):
        rep = solve_simplex_ls(np.eye(2), [0.7, 0.3])
        np.testing.assert_allclose(rep.d, [0.7, 0.3], atol=1e-9)
        assert rep.objective == pytest.approx(0, abs=1e-12)

    def test_grid_oracle_6x3(self, rng):
        V, u = rng.standard_normal((6, 3)), rng.standard_normal(6)
        rep = solve_simplex_ls(V, u)
        assert abs(rep.objective - grid_minimum(V, u)) <= 1e-5 or rep.objective < grid_minimum(V, u)

    def test_kkt_against_loops(self, rng):
        V, u = rng.standard_normal((5, 4)), rng.standard_normal(5)
        d = np.full(4, 0.25)
        assert kkt_violation(V, u, d) == pytest.approx(loop_kkt(V, u, d), rel=1e-12)

    def test_kkt_m1(self, rng):
        assert kkt_violation(rng.standard_normal((3, 1)), rng.standard_normal(3), [1.0]) == 0.0


class TestErrors:
    def test_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            solve_simplex_ls(np.array([[np.nan, 1.0]]), [1.0])

    def test_infeasible_warm_start(self):
        with pytest.raises(ValueError):
            solve_simplex_ls(np.eye(2), [1, 0], d0=[0.6, 0.6])

    def test_iteration_cap_flags_nonconverged(self, rng):
        V, u = rng.standard_normal((30, 20)), rng.standard_normal(30)
        rep = solve_simplex_ls(V, u, max_iter=2, tol=1e-14)
        assert not rep.converged
        assert rep.d.min() >= 0 and rep.d.sum() == pytest.approx(1, abs=1e-12)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 25), st.integers(0, 10_000))
    def test_kkt_and_feasibility(self, ell, m, seed):
        rng = np.random.default_rng(seed)
        V, u = rng.standard_normal((ell, m)), rng.standard_normal(ell)
        rep = solve_simplex_ls(V, u)
        assert rep.converged
        assert rep.kkt_violation <= 1e-8
        assert kkt_violation(V, u, rep.d) <= 1e-8 * (1 + np.abs(V).max() ** 2)
        assert rep.d.min() >= 0 and abs(rep.d.sum() - 1) <= 1e-12
        r = V @ rep.d - u
        assert rep.objective == pytest.approx(r @ r, rel=1e-12, abs=1e-300)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 15), st.integers(0, 10_000))
    def test_monotone_and_feasible_iterates(self, m, seed):
        rng = np.random.default_rng(seed)
        V, u = rng.standard_normal((8, m)), rng.standard_normal(8)
        rep = solve_simplex_ls(V, u, d0=rng.dirichlet(np.ones(m)), trace=True)
        h = np.array(rep.history)
        assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[:-1])))

    def test_matches_scipy_qp(self, rng):
        from scipy.optimize import minimize

        V, u = rng.standard_normal((10, 6)), rng.standard_normal(10)
        rep = solve_simplex_ls(V, u)
        res = minimize(lambda d: np.sum((V @ d - u) ** 2), np.full(6, 1 / 6), method="SLSQP",
                       bounds=[(0, 1)] * 6, constraints={"type": "eq", "fun": lambda d: d.sum() - 1},
                       options={"ftol": 1e-14, "maxiter": 500})
        assert rep.objective <= res.fun + 1e-9

    def test_warm_start_at_optimum(self, rng):
        V, u = rng.standard_normal((12, 9)), rng.standard_normal(12)
        first = solve_simplex_ls(V, u)
        again = solve_simplex_ls(V, u, d0=first.d)
        assert again.iterations <= 2 * V.shape[1]
        assert again.objective == pytest.approx(first.objective, rel=1e-10)

    def test_uncached_path_agrees(self, rng, monkeypatch):
        import rls2.simplex as mod

        V, u = rng.standard_normal((15, 7)), rng.standard_normal(15)
        a = solve_simplex_ls(V, u)
        monkeypatch.setattr(mod, "GRAM_CACHE_LIMIT", 0)
        b = solve_simplex_ls(V, u)
        assert b.objective == pytest.approx(a.objective, rel=1e-9, abs=1e-12)

    def test_trace_csv(self, rng, tmp_path):
        V, u = rng.standard_normal((5, 4)), rng.standard_normal(5)
        solve_simplex_ls(V, u, trace_path=tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "iteration,objective,kkt_violation" and len(lines) >= 2
