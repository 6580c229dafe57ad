import math

import numpy as np
import pytest
from hypothesis import settings

from dcpl.lattice import Disc, LatticeSpec, build_lattice_patch

settings.register_profile("dcpl", max_examples=60, deadline=None)
settings.load_profile("dcpl")

DEG = math.pi / 180


@pytest.fixture(scope="session")
def equilateral_patch():
    return build_lattice_patch(LatticeSpec.equilateral(0.1), Disc(0, 0.8))


@pytest.fixture(scope="session")
def skew_patch():
    spec = LatticeSpec.from_angles(80 * DEG, 60 * DEG, 0.1)
    return build_lattice_patch(spec, Disc(0, 0.8))


@pytest.fixture(scope="session")
def star_patch():
    return build_lattice_patch(LatticeSpec.equilateral(1.0), Disc(0, 1.1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES):
            terminalreporter.write_line(LINES[key])
