import numpy as np
import pytest

from moreau_escape.problems import PROBLEMS, get_problem

PROBLEM_NAMES = sorted(PROBLEMS)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=PROBLEM_NAMES)
def problem(request):
    return get_problem(request.param)


@pytest.fixture
def abs_quartic():
    return get_problem("abs_quartic")


@pytest.fixture
def smooth_saddle():
    return get_problem("smooth_saddle")


def safe_mu(problem, q=0.0):
    """The corpus mu when it keeps 1/mu above rho + q, otherwise half the limit."""
    if 1.0 / problem.mu > problem.rho + q:
        return problem.mu
    return 1.0 / (2.0 * (problem.rho + q))


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
