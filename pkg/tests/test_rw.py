import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfluct import presets, rw
from qfluct.dist import HeatField, MixtureDensity
from qfluct.errors import DomainError, NumericError
from qfluct.quantile import QuantileCurve

probs = st.floats(0.0, 1.0)


def enumerate_psi(j, n, r1, r2):
    # brute force over all 2^(n-1) outcomes of the indicators around index j
    le = lt = Fraction(0)
    for bits in itertools.product((0, 1), repeat=n - 1):
        left, right = bits[: j - 1], bits[j - 1 :]
        w = Fraction(1)
        for b in left:
            w *= r1 if b else 1 - r1
        for b in right:
            w *= r2 if b else 1 - r2
        if sum(left) <= sum(right):
            le += w
        if sum(left) < sum(right):
            lt += w
    return le, lt


def test_psi_examples():
    assert rw.psi(rw.RwParams(1, 5, 0.3, 0.6), "<=") == 1.0
    assert rw.psi(rw.RwParams(5, 5, 0.3, 0.6), "<") == 0.0
    assert rw.psi(rw.RwParams(2, 3, 0.5, 0.5), "<=") == pytest.approx(0.75, abs=1e-15)
    assert rw.psi(rw.RwParams(2, 3, 0.5, 0.5), "le") == rw.psi(rw.RwParams(2, 3, 0.5, 0.5), "≤")
    with pytest.raises(DomainError):
        rw.psi(rw.RwParams(2, 3, 0.5, 0.5), "==")
    with pytest.raises(DomainError):
        rw.RwParams(0, 3, 0.5, 0.5)
    with pytest.raises(DomainError):
        rw.RwParams(1, 3, 1.5, 0.5)


@pytest.mark.parametrize("j,n,r1,r2", [(1, 4, Fraction(1, 3), Fraction(1, 2)), (3, 6, Fraction(1, 4), Fraction(3, 4)), (8, 8, Fraction(2, 3), Fraction(1, 3)), (4, 7, Fraction(1, 2), Fraction(1, 5))])
def test_psi_matches_enumeration(j, n, r1, r2):
    le, lt = enumerate_psi(j, n, r1, r2)
    got = rw.psi_pair(j, n, float(r1), float(r2))
    assert float(got[0]) == pytest.approx(float(le), abs=1e-14)
    assert float(got[1]) == pytest.approx(float(lt), abs=1e-14)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 300), st.data(), probs, probs)
def test_psi_complements_and_dual(n, data, r1, r2):
    j = data.draw(st.integers(1, n))
    p = rw.RwParams(j, n, r1, r2)
    le, lt = rw.psi(p, "<="), rw.psi(p, "<")
    assert rw.psi(p, ">") == 1.0 - le
    assert rw.psi(p, ">=") == 1.0 - lt
    assert 0.0 <= lt <= le + 1e-15 <= 1.0 + 1e-15
    # P(L >= U) read from the mirrored walk
    dual = rw.psi(rw.RwParams(n - j + 1, n, r2, r1), "<=")
    assert rw.psi(p, ">=") == pytest.approx(dual, abs=1e-12)


def test_psi_vectorized_matches_scalar():
    r1 = np.array([0.1, 0.4, 0.9])
    r2 = np.array([0.3, 0.3, 0.05])
    le, lt = rw.psi_pair(40, 90, r1, r2)
    for i in range(3):
        p = rw.RwParams(40, 90, r1[i], r2[i])
        assert le[i] == pytest.approx(rw.psi(p, "<="), abs=1e-15)
        assert lt[i] == pytest.approx(rw.psi(p, "<"), abs=1e-15)


def test_q1q2_gaussian_example(gauss_curve):
    q1, q2 = rw.q1q2(rw.GapContext(gauss_curve, 0.0, 1.0))
    assert q1 == pytest.approx(0.25, abs=1e-14)
    assert q2 == pytest.approx(0.25, abs=1e-14)


def test_q1q2_against_monte_carlo():
    field = HeatField(presets.mixture("shifted"))
    curve = QuantileCurve(field, 0.3)
    ctx = rw.GapContext(curve, 0.4, 0.9, x=0.1, y=-0.05)
    q1, q2 = rw.q1q2(ctx)
    rng = np.random.default_rng(2024)
    size = 10_000_000
    bs = field.sample_initial(rng, size) + math.sqrt(0.4) * rng.standard_normal(size)
    bt = bs + math.sqrt(0.5) * rng.standard_normal(size)
    below = bs < curve.quantile(0.4) + 0.1
    level = curve.quantile(0.9) + 0.05
    for est, cond, event in ((q1, below, bt > level), (q2, ~below, bt < level)):
        m = int(cond.sum())
        freq = event[cond].mean()
        assert abs(est - freq) <= 3 * math.sqrt(freq * (1 - freq) / m)


def test_q1q2_degenerate_conditioning(gauss_curve):
    with pytest.raises(NumericError):
        rw.q1q2(rw.GapContext(gauss_curve, 0.0, 1.0, x=-60.0))
    with pytest.raises(DomainError):
        rw.GapContext(gauss_curve, 1.0, 1.0)


def test_mu_sigma_examples():
    assert rw.mu_sigma(0.5, 0.3, 0.3)[0] == 0.0
    assert rw.mu_sigma(0.5, 0.25, 0.25)[1] == 0.25
    mu, sigma = rw.mu_sigma(0.3, 0.2, 0.1)
    assert mu == pytest.approx(-0.01, abs=1e-15)
    assert sigma == pytest.approx(0.13, abs=1e-15)


@settings(max_examples=100)
@given(probs, probs, probs)
def test_mu_bounded_by_sigma(a, q1, q2):
    mu, sigma = rw.mu_sigma(a, q1, q2)
    assert abs(mu) <= sigma + 1e-15


def test_rwest_ratio():
    assert rw.rwest_ratio(rw.RwParams(10, 10, 1.0, 0.0), 0.5, 2.0) == 0.0
    rows = rw.rwest_sweep([(0.2, 0.1)], [100, 1000, 10_000])
    ratios = [r["ratio"] for r in rows]
    assert all(math.isfinite(v) for v in ratios)
    assert max(ratios) <= 2 * ratios[0]
    with pytest.raises(DomainError):
        rw.rwest_ratio(rw.RwParams(5, 10, 0.1, 0.2), 0.5, 2.0)
    with pytest.raises(DomainError):
        rw.rwest_ratio(rw.RwParams(5, 10, 0.2, 0.1), 0.5, 1.0)


def test_rwest_csv(tmp_path):
    path = tmp_path / "rw.csv"
    rw.write_rwest_csv(rw.rwest_sweep([(0.3, 0.1)], [100]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,r1,r2,tau,psi,ratio"
    assert lines[1].startswith("100,0.29999999999999999,0.10000000000000001,2,")


@pytest.mark.slow
def test_sandwich_gaussian_example(gauss_curve):
    ctx = rw.GapContext(gauss_curve, 0.5, 0.6, y=-0.05)
    rep = rw.sandwich_check(ctx, 200, 100_000, seed=7, deciles=False)
    assert rep["pass"]
    assert rep["lower"] <= rep["upper"]
    assert rep["params"]["j"] == 100


def test_sandwich_trivial_cases(gauss_curve):
    far = rw.sandwich_check(rw.GapContext(gauss_curve, 0.5, 0.6, y=10.0), 20, 10_000, seed=1, deciles=False)
    assert far["lower"] == pytest.approx(1.0, abs=1e-12)
    assert far["mid"] == 1.0 and far["upper"] == 1.0
    first = rw.sandwich_check(rw.GapContext(gauss_curve, 0.5, 0.6, y=-0.05), 20, 10_000, seed=1, j=1)
    assert first["upper"] == 1.0
    assert all(b["pass"] for b in first["deciles"])
    with pytest.raises(DomainError):
        rw.sandwich_check(rw.GapContext(gauss_curve, 0.5, 0.6), 20, 100, seed=1)


def test_taylor_remainder_vanishes_at_origin(gauss_curve):
    rep = rw.psi_taylor_check(rw.GapContext(gauss_curve, 0.5, 0.6))
    assert rep["remainder"] == 0.0
    assert rep["q1_remainder"] == pytest.approx(0.0, abs=1e-15)


def test_taylor_small_gap_example(gauss_curve):
    rep = rw.psi_taylor_check(rw.GapContext(gauss_curve, 0.5, 0.51, y=1e-3))
    assert rep["pass"]
    assert abs(rep["remainder"]) <= 10 * rep["bound_shape"]
    with pytest.raises(DomainError):
        rw.psi_taylor_check(rw.GapContext(gauss_curve, 0.5, 0.51, x=0.8, y=0.5))


def _sweep_ratios(curve, sign):
    return [rw.psi_taylor_check(rw.GapContext(curve, 0.5, 0.5 + d, y=sign * d**0.6))["ratio"] for d in (1e-1, 1e-2, 1e-3)]


@pytest.mark.xfail(strict=True, reason="remainder changes sign between the two larger gaps; spread is about 16x")
def test_taylor_ratio_stable_within_a_decade(gauss_curve):
    r = _sweep_ratios(gauss_curve, 1.0)
    assert max(r) / min(r) <= 10


def test_taylor_ratio_sweep_values(gauss_curve):
    # mpmath evaluation of the same remainder, 30 digits
    r = _sweep_ratios(gauss_curve, 1.0)
    assert r == pytest.approx([2.21e-4, 2.15e-3, 3.47e-3], rel=0.01)
    neg = _sweep_ratios(gauss_curve, -1.0)
    assert max(neg) / min(neg) <= 10
    assert max(r + neg) <= 10


def test_mu_taylor(preset_kernels):
    for k in preset_kernels.values():
        for d in (1e-2, 1e-3):
            rep = rw.mu_taylor_check(rw.GapContext(k.curve, 0.5, 0.5 + d, y=d**0.6))
            assert rep["ratio"] <= 10
            assert rep["mu"] > 0


def test_order_stat_cdf_examples():
    assert rw.order_stat_cdf(1, 1, 0.37)[0] == pytest.approx(0.37, abs=1e-15)
    beta, quad = rw.order_stat_cdf(1, 2, 0.3)
    assert beta == pytest.approx(0.51, abs=1e-15) and quad == pytest.approx(0.51, abs=1e-14)
    assert rw.order_stat_cdf(2, 3, 0.5)[0] == pytest.approx(0.5, abs=1e-15)
    assert rw.order_stat_cdf(4, 9, 0.0) == (0.0, 0.0)
    with pytest.raises(DomainError):
        rw.order_stat_cdf(0, 3, 0.5)
    with pytest.raises(NumericError):
        # too few nodes to integrate the degree-30 polynomial exactly
        rw.order_stat_cdf(10, 31, 0.4, nodes=2)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 400), st.data(), st.floats(0, 1))
def test_order_stat_routes_agree(n, data, u):
    j = data.draw(st.integers(1, n))
    beta, quad = rw.order_stat_cdf(j, n, u)
    assert abs(beta - quad) <= 1e-10


def test_binomial_moment_examples():
    rep = rw.binomial_moment_check(10, 0.3, 2)
    assert rep["moment"] == pytest.approx(12.684, abs=1e-12)
    assert rep["enumerated"] == pytest.approx(12.684, abs=1e-12)
    assert rep["ratio"] == pytest.approx(1.409333, rel=1e-6)
    var = rw.binomial_moment_check(50, 0.2, 1)
    assert var["moment"] == pytest.approx(8.0, abs=1e-12) and var["ratio"] <= 1
    with pytest.raises(DomainError):
        rw.binomial_moment_check(10, 0.3, 5)


def test_binomial_moment_polynomial_against_enumeration():
    for n in (1, 7, 40, 1000):
        for k in range(1, 9):
            for p in (1e-3, 0.17, 0.5):
                exact = rw.central_moment_poly(n, k)(p)
                # odd moments vanish at p = 1/2, so compare on the scale of sd^k
                scale = (n * p * (1 - p) + 1) ** (k / 2)
                assert exact == pytest.approx(rw.binomial_central_moment(n, p, k), rel=1e-9, abs=1e-12 * scale)


def test_binomial_ratio_uniformly_bounded():
    ratios = [
        rw.binomial_moment_check(n, p, r)["ratio"]
        for n in (10, 100, 1000, 10_000)
        for p in (1e-3, 1e-2, 0.1, 0.5)
        for r in (1, 2)
    ]
    assert max(ratios) <= 4
