import numpy as np
import pytest

from rls2.kernels import BasisKernelSpec, KernelBank, ScalingRule


def random_bank(rng, ell, m, rank=None):
    """Bank of random PSD matrices with unit scalings (no specs needed by the optimizer)."""
    mats = []
    for _ in range(m):
        r = rank or int(rng.integers(1, ell + 1))
        A = rng.standard_normal((ell, r))
        K = A @ A.T
        mats.append(K / np.trace(K))
    R = np.stack(mats)
    specs = [BasisKernelSpec.polynomial(1)] * m
    return KernelBank(R, np.ones(m), specs, np.zeros((ell, 1)), ScalingRule("unit"),
                      [None] * m)


def random_simplex(rng, m):
    return rng.dirichlet(np.ones(m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_regression(rng):
    X = rng.standard_normal((25, 3))
    y = X[:, 0] - 2.0 * X[:, 1] ** 2 + 0.1 * rng.standard_normal(25)
    return X, y


# ------------------------------------------------------------ acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n, text = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[n] = (text, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        text, ok, detail = _CRITERIA[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
