import dataclasses
import time

import pytest
from hypothesis import HealthCheck, settings

from neurozip.fixtures import get_fixture
from neurozip.pipeline import fit

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_FITS = {}
ACCEPTANCE_LINES = []


def fitted_fixture(name, **overrides):
    """Fit a bundled fixture once per session; returns ``(outcome, seconds)``."""
    key = (name, tuple(sorted(overrides.items())))
    if key not in _FITS:
        fx = get_fixture(name)
        cfg = dataclasses.replace(fx.train, **overrides)
        start = time.perf_counter()
        outcome = fit(fx.dataset(), cfg)
        _FITS[key] = (outcome, time.perf_counter() - start)
    return _FITS[key]


@pytest.fixture(scope="session")
def fitted():
    return fitted_fixture


@pytest.fixture(scope="session")
def acceptance():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion for the summary."""
    def record(number, title, ok, measured, threshold):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}: measured {measured}; required {threshold}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    def note(text):
        ACCEPTANCE_LINES.append(f"INFO {text}")
        print(f"INFO {text}")

    record.note = note
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
