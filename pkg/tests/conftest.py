import numpy as np
import pytest

from gauss_polytope import PolytopeProblem

FOUR_STEP_A = [[0.5, 0.7, 1.0, 0.9], [0.2, 0.7, 0.5, 1.0]]
FOUR_STEP_B = [2.0, 0.5]


@pytest.fixture
def orthant():
    return PolytopeProblem([[1.0], [1.0]], [0.0, 0.0])


@pytest.fixture
def four_step():
    return PolytopeProblem(FOUR_STEP_A, FOUR_STEP_B)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Recorder for acceptance verdicts, echoed in the terminal summary."""
    lines = request.config.acceptance_lines

    def record(number, title, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
