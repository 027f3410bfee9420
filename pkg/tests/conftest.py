import numpy as np
import pytest

from treewalk.coins import make_coin_field

PHASES = {"C1": [0.3, 1.1, 2.0], "C2": [-0.7, 0.5, 1.9], "C3": [2.4, -1.3, 0.8]}

# filled by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def pure_coin():
    return make_coin_field("pure", PHASES, seed=0)


@pytest.fixture(scope="session")
def smooth_coin():
    return make_coin_field("smooth-decay", dict(PHASES, g=0.5, eps=[1.0, 1.0, 1.0]), seed=0)


@pytest.fixture(scope="session")
def bound_state_coin():
    """Swap coins at e and a3 that trap one spin on the edge {e, a3}."""

    def swap(alpha, beta):
        m = np.array([[0, np.exp(1j * alpha), 0], [np.exp(1j * beta), 0, 0], [0, 0, 1]])
        return {"re": m.real.tolist(), "im": m.imag.tolist()}

    defects = [{"site": "e", "matrix": swap(0.4, 0.0)}, {"site": "3", "matrix": swap(0.0, 0.9)}]
    return make_coin_field("finite-defect", dict(PHASES, defects=defects), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
