import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfluct import presets
from qfluct.errors import DomainError
from qfluct.quantile import QuantileCurve


@pytest.fixture(scope="module")
def shifted():
    return QuantileCurve.from_mixture(presets.mixture("shifted"), 0.3)


def test_symmetric_median_is_zero(gauss_curve):
    assert gauss_curve.quantile(np.array([0.0, 1.0, 5.0])) == pytest.approx(0.0, abs=1e-14)
    assert gauss_curve.theta(1.0) == pytest.approx(np.sqrt(4 * np.pi), rel=1e-14)


@pytest.mark.parametrize(
    "t,q,u",
    [
        # mpmath root of the mixture cdf at 40 digits
        (0.0, -0.69485450070124339052, 0.3354638658450794623),
        (1.0, -0.78548626537204932441, 0.23573563196507528499),
        (3.0, -1.0505885185823285268, 0.16974626953323389294),
    ],
)
def test_shifted_quantile_matches_oracle(shifted, t, q, u):
    assert shifted.quantile(t) == pytest.approx(q, abs=1e-12)
    assert shifted.density_at(t) == pytest.approx(u, rel=1e-11)


def test_vector_and_scalar_agree(shifted):
    t = np.array([0.0, 0.25, 1.0, 4.0])
    vec = shifted.quantile(t)
    assert all(vec[i] == shifted.quantile(ti) for i, ti in enumerate(t))


def test_quantile_ode_residual(preset_kernels):
    h = 1e-3
    for k in preset_kernels.values():
        c = k.curve
        for t in (0.1, 0.7, 2.5):
            dq = (c.quantile(t - 2 * h) - 8 * c.quantile(t - h) + 8 * c.quantile(t + h) - c.quantile(t + 2 * h)) / (12 * h)
            assert abs(dq - c.ode_rhs(t)) <= 1e-6


def test_domain_errors(shifted):
    with pytest.raises(DomainError):
        shifted.quantile(-0.5)
    with pytest.raises(DomainError):
        shifted.ode_rhs(0.0)
    with pytest.raises(DomainError):
        QuantileCurve(shifted.field, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 10.0))
def test_quantile_solves_level(alpha, t):
    c = QuantileCurve.from_mixture(presets.mixture("bimodal"), alpha)
    q = c.quantile(t)
    assert abs(c.field.cdf(q, t) - alpha) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.49), st.floats(0.0, 3.0))
def test_quantile_monotone_in_level(alpha, t):
    mix = presets.mixture("shifted")
    lo = QuantileCurve.from_mixture(mix, alpha).quantile(t)
    hi = QuantileCurve.from_mixture(mix, alpha + 0.5).quantile(t)
    assert lo < hi
