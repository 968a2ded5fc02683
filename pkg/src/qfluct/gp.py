"""Sampling the limit process on a grid and checking its path laws.

Paths are drawn as ``L z`` with ``L`` the lower Cholesky factor of the kernel
matrix.  The quartic variation, the mean-square increments of the rescaled
process, and a structure-function Hurst estimate are computed from samples or
directly from the kernel.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, NumericError
from .kernel import LimitKernel
from .rng import substream

MAX_GRID = 8192
JITTER_START = 1e-14
JITTER_CAP = 1e-10


@dataclass(frozen=True)
class GpSample:
    grid: np.ndarray
    paths: np.ndarray  # replicas x len(grid)
    seed: int
    fingerprint: str

    @property
    def replicas(self) -> int:
        return self.paths.shape[0]


def kernel_fingerprint(kernel: LimitKernel) -> str:
    doc = {"mixture": kernel.field.base.to_json(), "alpha": kernel.alpha}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def cholesky_jitter(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter only if needed.

    Jitter is relative to the mean diagonal and escalates by decades from
    1e-14 to 1e-10.  Returns the factor and the jitter used.
    """
    scale = float(np.mean(np.diag(cov)))
    info = 0
    for jitter in [0.0] + [JITTER_START * 10**i for i in range(5)]:
        a = cov + np.eye(len(cov)) * jitter * scale if jitter else cov
        chol, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            return chol, jitter
        if info < 0:
            raise NumericError(f"dpotrf argument error {info}")
    raise NumericError(
        f"kernel matrix not positive definite: leading minor of order {info} fails "
        f"even with relative jitter {JITTER_CAP:g}"
    )


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d array")
    if grid.size > MAX_GRID:
        raise DomainError(f"grid longer than {MAX_GRID}")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    return grid


def _draw(chol, replicas, seed, salt, workers):
    n = chol.shape[0]
    out = np.empty((replicas, n))

    def one(i):
        out[i] = substream(seed, i, salt).standard_normal(n)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(one, range(replicas)))
    else:
        for i in range(replicas):
            one(i)
    # rows are z^T; paths = z L^T
    return out @ chol.T


def sample_gp(kernel: LimitKernel, grid, replicas: int, seed: int, workers: int = 1, cov=None) -> GpSample:
    """Draw ``replicas`` independent paths of F on ``grid``.

    ``cov`` may carry a precomputed ``kernel.gram(grid)``.
    """
    grid = _check_grid(grid)
    if replicas < 1:
        raise DomainError("replicas must be positive")
    if cov is None:
        cov = kernel.gram(grid, workers=workers)
    chol, _ = cholesky_jitter(cov)
    paths = _draw(chol, replicas, seed, salt=1, workers=workers)
    return GpSample(grid, paths, int(seed), kernel_fingerprint(kernel))


def fbm_quarter_cov(grid) -> np.ndarray:
    s, t = np.meshgrid(grid, grid, indexing="ij")
    return 0.5 * (np.sqrt(s) + np.sqrt(t) - np.sqrt(np.abs(t - s)))


def sample_fbm_quarter(grid, replicas: int, seed: int) -> GpSample:
    """Exact fBm with Hurst 1/4; calibration harness for the estimators.

    A leading ``t = 0`` grid point is handled as the fixed value 0.
    """
    grid = _check_grid(grid)
    pos = grid > 0
    chol, _ = cholesky_jitter(fbm_quarter_cov(grid[pos]))
    paths = np.zeros((replicas, grid.size))
    paths[:, pos] = _draw(chol, replicas, seed, salt=2, workers=1)
    return GpSample(grid, paths, int(seed), "fbm-H0.25")


def quartic_variation(sample: GpSample, t: float) -> np.ndarray:
    """``sum_{0 < t_j <= t} |F(t_j) - F(t_{j-1})|^4`` for each replica."""
    if t > sample.grid[-1]:
        raise DomainError(f"t={t} lies beyond the grid")
    last = np.searchsorted(sample.grid, t, side="right")
    inc = np.diff(sample.paths[:, :last], axis=1)
    return np.sum(inc**4, axis=1)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson rule with Richardson correction."""
    if b == a:
        return 0.0

    def simpson(fa, fm, fb, a, b):
        return (b - a) * (fa + 4.0 * fm + fb) / 6.0

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise NumericError(f"adaptive Simpson did not converge on [{a}, {b}]")
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth + 1
        )

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)


def quartic_limit(kernel: LimitKernel, t: float, tol: float = 1e-10) -> float:
    """``(6/pi) int_0^t theta(s)^2 ds``, the limit of the quartic variation."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    theta2 = lambda s: float(kernel.curve.theta(s)) ** 2
    # tolerance applies to the scaled result
    return 6.0 / math.pi * adaptive_simpson(theta2, 0.0, float(t), tol * math.pi / 6.0)


def expected_quartic_variation(kernel: LimitKernel, grid) -> float:
    """``E V(t_max)`` on ``grid`` from exact kernel increments: ``3 sum (E dF^2)^2``."""
    grid = np.asarray(grid, dtype=float)
    var = np.asarray(kernel.msd(grid[:-1], grid[1:]))
    return float(3.0 * np.sum(var**2))


def mean_sq_increment_check(kernel: LimitKernel, grid) -> dict:
    """Exact ``E (dF~_j)^2`` against ``sqrt(2/pi) dt^(1/2) u(q(t_j), t_j)`` per cell.

    ``F~ = u(q(t), t) F(t)``.  Reports discrepancies and the fitted constant
    ``max |disc| / dt^(3/2)``.
    """
    grid = np.asarray(grid, dtype=float)
    dt = np.diff(grid)
    if grid.size < 2 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise DomainError("mean_sq_increment_check needs a uniform grid")
    lo, hi = grid[:-1], grid[1:]
    exact = (
        np.asarray(kernel.rho_tilde(hi, hi))
        + np.asarray(kernel.rho_tilde(lo, lo))
        - 2.0 * np.asarray(kernel.rho_tilde(lo, hi))
    )
    leading = math.sqrt(2.0 / math.pi) * np.sqrt(dt) * np.asarray(kernel.curve.density_at(hi))
    disc = exact - leading
    return {
        "dt": float(dt[0]),
        "exact": exact,
        "leading": leading,
        "discrepancy": disc,
        "rel_discrepancy": disc / leading,
        "constant": float(np.max(np.abs(disc)) / dt[0] ** 1.5),
    }


def dyadic_lags(npoints: int, max_lags: int = 7) -> np.ndarray:
    count = min(max_lags, int(math.log2(max(npoints - 1, 1))) - 2)
    if count < 4:
        raise DomainError("need at least 4 dyadic lags; grid too short")
    return 2 ** np.arange(count)


def structure_function(sample: GpSample, lags) -> np.ndarray:
    """Mean ``|F(t + lag) - F(t)|^2`` pooled over positions and replicas."""
    return np.array([np.mean((sample.paths[:, lag:] - sample.paths[:, :-lag]) ** 2) for lag in lags])


def hurst_estimate(sample: GpSample, max_lags: int = 7) -> float:
    """Half the log-log slope of the pooled structure function over dyadic lags.

    Assumes a uniform grid.
    """
    lags = dyadic_lags(sample.grid.size, max_lags)
    sf = structure_function(sample, lags)
    dt = sample.grid[1] - sample.grid[0]
    slope = np.polyfit(np.log(lags * dt), np.log(sf), 1)[0]
    return float(slope / 2.0)


def hurst_from_kernel(kernel: LimitKernel, s: float = 0.5, gaps=None) -> float:
    """Same estimator applied to the exact ``E|F(s + gap) - F(s)|^2``."""
    if gaps is None:
        gaps = 2.0 ** -np.arange(6, 15)
    gaps = np.asarray(gaps, dtype=float)
    msd = np.asarray(kernel.msd(s, s + gaps))
    return float(np.polyfit(np.log(gaps), np.log(msd), 1)[0] / 2.0)


def refinement_discrepancies(sample: GpSample, limit: float, levels, t: float = None) -> list[dict]:
    """Quartic variation on nested sub-grids of the same paths.

    ``levels`` are interval counts dividing the sample's interval count.  For
    each level, reports the replica mean of ``V(t)`` and the root-mean-square
    deviation ``sqrt(mean |V - limit|^2)``.
    """
    t = sample.grid[-1] if t is None else t
    cells = sample.grid.size - 1
    rows = []
    for level in levels:
        if cells % level:
            raise DomainError(f"level {level} does not divide {cells} intervals")
        stride = cells // level
        sub = GpSample(sample.grid[::stride], sample.paths[:, ::stride], sample.seed, sample.fingerprint)
        v = quartic_variation(sub, t)
        rows.append(
            {
                "grid_n": int(level),
                "mean": float(v.mean()),
                "rms_discrepancy": float(np.sqrt(np.mean((v - limit) ** 2))),
            }
        )
    return rows


def quartic_report(sample: GpSample, kernel: LimitKernel, t: float = None) -> dict:
    t = sample.grid[-1] if t is None else t
    limit = quartic_limit(kernel, t)
    est = float(np.mean(quartic_variation(sample, t)))
    return {
        "limit": limit,
        "estimate": est,
        "rel_err": abs(est - limit) / limit,
        "grid_n": int(sample.grid.size - 1),
        "replicas": int(sample.replicas),
        "seed": int(sample.seed),
    }


def write_paths_csv(sample: GpSample, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"replica_{i}" for i in range(sample.replicas)])
        for j, t in enumerate(sample.grid):
            w.writerow([format(float(t), ".17g")] + [format(float(v), ".17g") for v in sample.paths[:, j]])


def quartic_l2_discrepancy(kernel: LimitKernel, grid, levels, limit: float = None, cov=None) -> list[dict]:
    """Exact ``E|V(t_max) - limit|^2`` on nested sub-grids, no sampling.

    For a centred Gaussian pair with variances ``a, b`` and covariance ``c``,
    ``Cov(X^4, Y^4) = 72 a b c^2 + 24 c^4``; summing over increment pairs gives
    the variance of ``V``, and ``3 sum a^2`` its mean.
    """
    grid = _check_grid(grid)
    if limit is None:
        limit = quartic_limit(kernel, grid[-1])
    if cov is None:
        cov = kernel.gram(grid)
    cells = grid.size - 1
    rows = []
    for level in levels:
        if cells % level:
            raise DomainError(f"level {level} does not divide {cells} intervals")
        idx = np.arange(0, grid.size, cells // level)
        sub = cov[np.ix_(idx, idx)]
        inc = np.diff(np.diff(sub, axis=0), axis=1)
        var = np.diag(inc)
        mean = 3.0 * float(np.sum(var**2))
        c2 = inc**2
        variance = float(72.0 * var @ c2 @ var + 24.0 * np.sum(c2**2))
        rows.append(
            {
                "grid_n": int(level),
                "mean": mean,
                "bias": mean - limit,
                "l2": math.sqrt(variance + (mean - limit) ** 2),
            }
        )
    return rows
