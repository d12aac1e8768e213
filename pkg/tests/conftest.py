import numpy as np
import pytest

from membrane_sphere.spectral import SpectralField, build_grid


def random_field(grid, rng, decay=0.0):
    """Band-limited random field with coefficients damped by exp(-decay l)."""
    c = rng.standard_normal(grid.coeff_shape) * np.exp(-decay * grid.degrees)
    return SpectralField(grid, np.where(grid.triangle, c, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return build_grid(1.0, 16)


@pytest.fixture(scope="session")
def grid32():
    return build_grid(1.0, 32)


ACCEPTANCE = []


def record_criterion(number, title, ok, detail=""):
    """Log one acceptance criterion; the lines are echoed in the terminal summary."""
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
