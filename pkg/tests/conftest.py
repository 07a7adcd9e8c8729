import numpy as np
import pytest

from polyground.radial import RadialField, make_grid


def smooth_field(grid, rng, amp=(0.5, 3.0)):
    """Random smooth, rapidly decaying profile: a Gaussian modulated by a low polynomial."""
    r = grid.nodes
    a = rng.uniform(0.08, 0.18) * grid.radius
    b = rng.uniform(-0.3, 0.6)
    c = rng.uniform(-0.2, 0.2)
    x = r / a
    vals = rng.uniform(*amp) * (1.0 + b * x**2 + c * x**4 / 4) * np.exp(-0.5 * x**2)
    return RadialField(grid, vals)


def gaussian(grid, sigma=1.0, amp=1.0):
    return RadialField(grid, amp * np.exp(-0.5 * (grid.nodes / sigma) ** 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid5():
    return make_grid(5, 12.0, 512)


ACCEPTANCE_LINES = []


def acceptance_line(number, ok, text):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
