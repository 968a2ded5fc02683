import math

import numpy as np
import pytest

from qfluct import gp
from qfluct.errors import DomainError, NumericError


def test_variance_at_start_and_unit_time(gauss_kernel):
    s = gp.sample_gp(gauss_kernel, [0.0, 1.0], 100_000, seed=42)
    var = s.paths.var(axis=0)
    assert var[0] == pytest.approx(math.pi / 2, rel=0.02)
    assert var[1] == pytest.approx(math.pi, rel=0.02)


def test_sampling_is_deterministic_across_workers(gauss_kernel):
    grid = np.linspace(0, 1, 33)
    a = gp.sample_gp(gauss_kernel, grid, 16, seed=5)
    b = gp.sample_gp(gauss_kernel, grid, 16, seed=5, workers=4)
    assert np.array_equal(a.paths, b.paths)
    assert a.fingerprint == b.fingerprint
    c = gp.sample_gp(gauss_kernel, grid, 16, seed=6)
    assert not np.array_equal(a.paths, c.paths)


def test_replica_streams_do_not_depend_on_count(gauss_kernel):
    grid = np.linspace(0, 1, 9)
    few = gp.sample_gp(gauss_kernel, grid, 3, seed=11)
    many = gp.sample_gp(gauss_kernel, grid, 10, seed=11)
    assert np.array_equal(few.paths, many.paths[:3])


def test_empirical_covariance_matches_kernel(preset_kernels):
    grid = np.array([0.0, 0.5, 1.0])
    for k in preset_kernels.values():
        s = gp.sample_gp(k, grid, 10_000, seed=42)
        emp = np.cov(s.paths, rowvar=False)
        assert np.max(np.abs(emp - k.gram(grid)) / np.abs(k.gram(grid))) <= 0.05


def test_excess_kurtosis_small(gauss_kernel):
    s = gp.sample_gp(gauss_kernel, [0.25, 0.75], 100_000, seed=42)
    z = (s.paths - s.paths.mean(axis=0)) / s.paths.std(axis=0)
    assert np.all(np.abs(np.mean(z**4, axis=0) - 3.0) <= 0.1)


def test_quartic_variation_of_constant_path_is_zero():
    grid = np.linspace(0, 1, 5)
    s = gp.GpSample(grid, np.ones((2, 5)), 0, "const")
    assert np.array_equal(gp.quartic_variation(s, 1.0), np.zeros(2))
    with pytest.raises(DomainError):
        gp.quartic_variation(s, 1.5)


def test_quartic_variation_partial_window():
    grid = np.array([0.0, 1.0, 2.0, 3.0])
    s = gp.GpSample(grid, np.array([[0.0, 1.0, 3.0, 0.0]]), 0, "x")
    assert gp.quartic_variation(s, 2.0)[0] == 1 + 16
    assert gp.quartic_variation(s, 2.5)[0] == 1 + 16


def test_quartic_limit_values(gauss_kernel, preset_kernels):
    # 12 (t + t^2 / 2) for the standard Gaussian start
    assert gp.quartic_limit(gauss_kernel, 1.0) == pytest.approx(18.0, rel=1e-9)
    assert gp.quartic_limit(gauss_kernel, 0.0) == 0.0
    k = preset_kernels["shifted"]
    vals = [gp.quartic_limit(k, t) for t in (0.25, 0.5, 1.0)]
    assert vals[0] < vals[1] < vals[2]
    with pytest.raises(DomainError):
        gp.quartic_limit(k, -1.0)


def test_adaptive_simpson():
    assert gp.adaptive_simpson(math.sin, 0, math.pi, 1e-12) == pytest.approx(2.0, abs=1e-11)
    assert gp.adaptive_simpson(lambda x: x**3, 0, 2, 1e-12) == pytest.approx(4.0, abs=1e-13)


def test_expected_quartic_variation_approaches_limit(gauss_kernel):
    fine = gp.expected_quartic_variation(gauss_kernel, np.linspace(0, 1, 4097))
    coarse = gp.expected_quartic_variation(gauss_kernel, np.linspace(0, 1, 257))
    assert abs(fine - 18.0) < abs(coarse - 18.0)
    assert fine == pytest.approx(18.0, rel=0.01)


def test_quartic_l2_discrepancy_decreases(gauss_kernel):
    grid = np.linspace(0, 1, 1025)
    rows = gp.quartic_l2_discrepancy(gauss_kernel, grid, [128, 256, 512, 1024], limit=18.0)
    l2 = [r["l2"] for r in rows]
    assert all(a > b for a, b in zip(l2, l2[1:]))
    # the variance of V shrinks roughly like 1/N
    assert l2[0] / l2[-1] == pytest.approx(math.sqrt(8), rel=0.15)
    with pytest.raises(DomainError):
        gp.quartic_l2_discrepancy(gauss_kernel, grid, [300], limit=18.0)


def test_quartic_l2_matches_monte_carlo(gauss_kernel):
    grid = np.linspace(0, 1, 65)
    exact = gp.quartic_l2_discrepancy(gauss_kernel, grid, [64], limit=18.0)[0]
    s = gp.sample_gp(gauss_kernel, grid, 20_000, seed=42)
    v = gp.quartic_variation(s, 1.0)
    assert v.mean() == pytest.approx(exact["mean"], rel=0.02)
    assert math.sqrt(np.mean((v - 18.0) ** 2)) == pytest.approx(exact["l2"], rel=0.05)


def test_fbm_calibration():
    grid = np.linspace(0, 1, 1025)
    s = gp.sample_fbm_quarter(grid, 32, seed=42)
    assert np.all(s.paths[:, 0] == 0)
    # E sum |dB_H|^4 = 3 N dt^(4H) = 3 at H = 1/4
    assert gp.quartic_variation(s, 1.0).mean() == pytest.approx(3.0, rel=0.10)
    assert gp.hurst_estimate(s) == pytest.approx(0.25, abs=0.02)


def test_hurst_from_kernel_and_samples(gauss_kernel):
    assert gp.hurst_from_kernel(gauss_kernel) == pytest.approx(0.25, abs=0.01)
    s = gp.sample_gp(gauss_kernel, np.linspace(0, 1, 1025), 16, seed=42)
    assert gp.hurst_estimate(s) == pytest.approx(0.25, abs=0.03)


def test_dyadic_lags_needs_enough_points():
    assert gp.dyadic_lags(1025).tolist() == [1, 2, 4, 8, 16, 32, 64]
    with pytest.raises(DomainError):
        gp.dyadic_lags(17)


def test_mean_square_increment_expansion(preset_kernels):
    for k in preset_kernels.values():
        rep = gp.mean_sq_increment_check(k, np.linspace(0, 1, 4097))
        assert np.max(np.abs(rep["rel_discrepancy"][1:])) <= 0.01
        consts = [gp.mean_sq_increment_check(k, np.linspace(0, 1, 2**m + 1))["constant"] for m in (8, 10, 12)]
        assert max(consts) / min(consts) <= 2.0
    with pytest.raises(DomainError):
        gp.mean_sq_increment_check(k, np.array([0.0, 0.1, 0.3]))


def test_cholesky_jitter_escalates_and_reports_failure():
    v = np.array([1.0, 1.0 + 1e-13])
    rank_one = np.outer(v, v)
    chol, jitter = gp.cholesky_jitter(rank_one)
    assert jitter > 0
    assert np.allclose(chol @ chol.T, rank_one, atol=1e-9)
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NumericError, match="order 2"):
        gp.cholesky_jitter(bad)


def test_grid_validation(gauss_kernel):
    with pytest.raises(DomainError):
        gp.sample_gp(gauss_kernel, np.linspace(0, 1, gp.MAX_GRID + 1), 1, seed=0)
    with pytest.raises(DomainError):
        gp.sample_gp(gauss_kernel, [0.0, 0.5, 0.5], 1, seed=0)
    with pytest.raises(DomainError):
        gp.sample_gp(gauss_kernel, [0.0, 0.5], 0, seed=0)


def test_reports_and_csv(tmp_path, gauss_kernel):
    s = gp.sample_gp(gauss_kernel, np.linspace(0, 1, 65), 4, seed=42)
    rep = gp.quartic_report(s, gauss_kernel)
    assert rep["limit"] == pytest.approx(18.0) and rep["grid_n"] == 64 and rep["seed"] == 42
    rows = gp.refinement_discrepancies(s, 18.0, [16, 64])
    assert [r["grid_n"] for r in rows] == [16, 64]
    path = tmp_path / "paths.csv"
    gp.write_paths_csv(s, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,replica_0,replica_1,replica_2,replica_3"
    assert len(lines) == 66
    assert float(lines[10].split(",")[2]) == s.paths[1, 9]
