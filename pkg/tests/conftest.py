from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from anesia.domain import Domain, LinearAdditiveUtility

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_utility(shape, rng: np.random.Generator) -> LinearAdditiveUtility:
    return LinearAdditiveUtility.from_raw(rng.random(len(shape)) + 0.05, [rng.random(k) + 1e-3 for k in shape])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def flight():
    return Domain.from_counts((4, 4, 3), "flight")


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
