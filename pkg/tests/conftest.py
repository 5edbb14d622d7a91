import numpy as np
import pytest

from splitls.core import ProxOracle, Smooth, SplitProblem, zero_oracle


def half_square(weight=1.0, center=0.0):
    """``weight/2 ||x - center||^2`` with its closed-form prox."""
    def value(x):
        d = np.asarray(x, dtype=float) - center
        return 0.5 * weight * float(np.sum(d * d))

    def prox(x, gamma):
        return (np.asarray(x, dtype=float) + gamma * weight * center) / (1 + gamma * weight)

    return ProxOracle(value, prox, is_generalized_quadratic=True,
                      grad=lambda x: weight * (np.asarray(x, dtype=float) - center),
                      name="half-square")


def abs_oracle(weight=1.0):
    def prox(x, gamma):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * np.maximum(np.abs(x) - gamma * weight, 0.0)

    return ProxOracle(lambda x: weight * float(np.sum(np.abs(x))), prox, name="l1")


@pytest.fixture
def quad_zero_problem():
    """phi1 = 0.5 x^2, phi2 = 0 in one dimension."""
    return SplitProblem(half_square(), zero_oracle(), Smooth(1.0, convex=True), 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# ---------------------------------------------------------------- acceptance report

_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA.append((mark.args[0], mark.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num, title, passed, detail in sorted(_CRITERIA):
        tr.write_line(f"criterion {num:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
