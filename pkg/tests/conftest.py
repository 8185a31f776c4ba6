import numpy as np
import pytest
from hypothesis import settings

from fracheat.core import SpaceGrid, TimeGrid
from fracheat.kernel import MediumParams
from fracheat.noise_field import NoiseEnsemble, NoiseSpec
from fracheat.solver import AffineCoefficient, SolverConfig

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

TWO_MEDIA = MediumParams(4.0, 1.0, 1.0, 2.0)
HOMOGENEOUS = MediumParams(1.0, 1.0, 1.0, 1.0)
# beta = 0 for TWO_MEDIA, so the reflected term needs its own medium
REFLECTING = MediumParams(4.0, 1.0, 1.0, 1.0)


def small_config(h=(0.5, 1.0), N=12, M=17, J=3, H=0.75, medium=TWO_MEDIA, L=4.0, **kw):
    noise = NoiseSpec(J, H, L)
    return SolverConfig(medium, TimeGrid(1.0, N), SpaceGrid(L, M), noise,
                        AffineCoefficient(*h), **kw)


@pytest.fixture
def cfg():
    return small_config()


@pytest.fixture
def ensemble(cfg):
    return NoiseEnsemble.sample(cfg.noise, cfg.tgrid, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
