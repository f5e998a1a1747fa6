import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sechgate.experiments import SweepConfig, reference_unitary, sweep_hyperfine
from sechgate.pulse_engine import TWO_PI, SechPulseParams, reference_pulse

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA = {}


@pytest.fixture
def record_criterion():
    """Store ``(number, passed, detail)`` for the end-of-run criterion summary."""

    def record(number, passed, detail):
        CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def gate_pulse():
    return reference_pulse()


@pytest.fixture(scope="session")
def bare_pulse():
    return SechPulseParams(4.0, 3.0, 1.28, 1.5)


@pytest.fixture(scope="session")
def sweep_config():
    return SweepConfig()


@pytest.fixture(scope="session")
def reference(sweep_config):
    return reference_unitary(sweep_config)


@pytest.fixture(scope="session")
def surfaces(sweep_config):
    """Default 21x21 decay-free surfaces with and without refocusing."""
    refocused = sweep_hyperfine(sweep_config, decay=False, refocus=True)
    unrefocused = sweep_hyperfine(sweep_config, decay=False, refocus=False)
    return refocused, unrefocused


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


W = TWO_PI
