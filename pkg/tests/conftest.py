import numpy as np
import pytest

from geopid.systems import circle_particle, euclidean, unicycle


@pytest.fixture(scope="session")
def robot():
    return unicycle()


@pytest.fixture(scope="session")
def circle():
    return circle_particle(radius=1.5, mass=1.0, theta_dot=2.0)


@pytest.fixture(scope="session")
def plane():
    return euclidean(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_robot_point(rng):
    return np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi)])


ACCEPTANCE_LINES = {}


def record_acceptance(number: int, ok: bool, detail: str):
    """Store the one-line verdict of an acceptance criterion for the terminal summary."""
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
