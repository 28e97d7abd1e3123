import math

import numpy as np
import pytest
from hypothesis import settings

from dmaquant.beamformer import NAMED_PATTERNS, design_first_order
from dmaquant.synthesis import ArrayGeometry, SamplingConfig, SourceSignal

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

F0 = 1999.0
FS = 44100.0
TAU = 2 * math.pi * 0.04


@pytest.fixture
def source():
    return SourceSignal.from_hz(F0)


@pytest.fixture
def geometry():
    return ArrayGeometry.from_wavelength_ratio(0.04, F0)


@pytest.fixture
def sampling():
    return SamplingConfig(FS, 512)


@pytest.fixture
def designs(geometry):
    return {p: design_first_order(geometry, 2 * math.pi * F0, a) for p, a in NAMED_PATTERNS.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
