import numpy as np
import pytest

from ldpcsdp.ensemble import DegreeDistribution

# (check exponent n, eps, reference rate, reference delta) for rho(x) = x^n, dv_max = 7
REFERENCE_COLUMNS = [
    (3, 0.69, 0.2959, 0.0478),
    (4, 0.56, 0.421, 0.0432),
    (5, 0.49, 0.4922, 0.0349),
    (6, 0.38, 0.593, 0.0435),
    (7, 0.33, 0.6439, 0.039),
]

# 4-decimal reference lambda of the x^5 design
REFERENCE_X5_LAMBDA = {2: 0.4021, 3: 0.2137, 7: 0.3902}


def check_monomial(n: int) -> DegreeDistribution:
    return DegreeDistribution({n + 1: 1.0}, kind="check")


def lam(mapping) -> DegreeDistribution:
    return DegreeDistribution(mapping, kind="variable")


def normalized_reference(mapping):
    """Reference 4-decimal lambdas rescaled to sum exactly to 1."""
    total = sum(mapping.values())
    return lam({d: w / total for d, w in mapping.items()})


def random_simplex(rng, size):
    w = rng.exponential(size=size)
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
