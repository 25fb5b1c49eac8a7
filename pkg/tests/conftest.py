import math

import numpy as np
import pytest
from hypothesis import settings

from homb.states import make_comb

settings.register_profile("homb", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("homb")

TWO_PI = 2.0 * math.pi


def rad(ghz):
    return TWO_PI * ghz / 1000.0


@pytest.fixture(scope="session")
def comb310():
    """Four-bin comb of the main experiments: 90 GHz spacing, 17 GHz Gaussian bins, 310 GHz source."""
    return make_comb(fsr_ghz=90.0, bin_fwhm_ghz=17.0, spdc_fwhm_ghz=310.0)


@pytest.fixture(scope="session")
def wide_delays():
    return np.arange(-150.0, 150.0 + 1e-9, 0.5)


ACCEPTANCE = []


def report(number, title, ok, detail):
    """Record and print one acceptance line."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
