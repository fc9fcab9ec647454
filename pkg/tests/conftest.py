import numpy as np
import pytest

from rydberg_sps.config import PhysicalConfig
from rydberg_sps.ensemble import AtomSet
from rydberg_sps.pulses import PulseSequence


@pytest.fixture
def cfg():
    return PhysicalConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def still(*points):
    """Stationary atoms at the given (x, y, z) points in um."""
    return AtomSet.stationary(np.array(points, dtype=float))


def laser1_only(cfg, rabi, start=0.0, duration=1.0):
    return PulseSequence((start, 0, 0), (duration, 0, 0), (rabi, 0, 0), cfg.detunings)


def two_level(rabi, det, t):
    """Closed-form amplitudes of |g> and |i> for H = [[0, W/2], [W/2, -det]]."""
    w = np.hypot(rabi, det)
    ph = np.exp(0.5j * det * t)
    return (ph * (np.cos(w * t / 2) - 1j * det / w * np.sin(w * t / 2)),
            ph * (-1j * rabi / w * np.sin(w * t / 2)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
