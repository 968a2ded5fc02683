import numpy as np
import pytest

from qfluct import presets
from qfluct.dist import HeatField, MixtureDensity
from qfluct.kernel import LimitKernel
from qfluct.quantile import QuantileCurve

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def gauss_field():
    return HeatField(MixtureDensity.standard_normal())


@pytest.fixture(scope="session")
def gauss_curve(gauss_field):
    return QuantileCurve(gauss_field, 0.5)


@pytest.fixture(scope="session")
def gauss_kernel(gauss_curve):
    return LimitKernel(gauss_curve)


@pytest.fixture(scope="session")
def preset_kernels():
    return {
        name: LimitKernel(QuantileCurve.from_mixture(presets.mixture(name), presets.MIXTURE_ALPHA[name]))
        for name in presets.MIXTURES
    }


@pytest.fixture(scope="session")
def fdd_sample(gauss_field):
    from qfluct import particles

    cfg = particles.EnsembleConfig(gauss_field, 0.5, 10_000, (0.0, 0.5, 1.0), 10_000, seed=presets.PARTICLE_SEED)
    return particles.simulate_ensemble(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[7:9])):
            terminalreporter.write_line(line)
