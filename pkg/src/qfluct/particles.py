"""Monte Carlo ensembles of independent Brownian particles.

Each replica draws ``n`` starting points from the mixture, moves them by
independent Gaussian increments between the requested times and records the
``j``-th order statistic at every time.  Only requested times are
materialized.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._select import select_rows
from .dist import HeatField
from .errors import DomainError
from .quantile import QuantileCurve
from .rng import substream

DEFAULT_BUDGET = 50_000_000  # particle positions held per replica batch
_CHUNK_FLOATS = 4_000_000
_SALT_POSITIONS = 3


def order_index(alpha: float, n: int, rule="ceil") -> int:
    """``j(n)``: ``ceil(alpha n)``, the median ``floor((n + 1)/2)``, or an explicit int."""
    if rule == "ceil":
        j = math.ceil(alpha * n - 1e-9 * alpha * n)
    elif rule == "median":
        j = (n + 1) // 2
    elif isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        j = int(rule)
    else:
        raise DomainError(f"unknown j rule {rule!r}")
    return j


@dataclass(frozen=True)
class EnsembleConfig:
    field: HeatField
    alpha: float
    n: int
    times: tuple
    replicas: int
    seed: int = 7
    j_rule: object = "ceil"
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if self.n < 2:
            raise DomainError("need at least two particles")
        if self.replicas < 1:
            raise DomainError("replicas must be positive")
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
            raise DomainError("times must be a sorted list of nonnegative reals")
        object.__setattr__(self, "times", tuple(float(t) for t in times))
        if self.n * len(self.times) > self.budget:
            raise DomainError(
                f"n x |times| = {self.n * len(self.times)} exceeds the memory budget {self.budget}"
            )
        j = self.j
        if not 1 <= j <= self.n or abs(j / self.n - self.alpha) > 1.0 / self.n:
            raise DomainError(f"j={j} is not within 1/n of alpha n (n={self.n}, alpha={self.alpha})")

    @property
    def j(self) -> int:
        return order_index(self.alpha, self.n, self.j_rule)

    def curve(self) -> QuantileCurve:
        return QuantileCurve(self.field, self.alpha)


@dataclass(frozen=True)
class FluctuationSample:
    cfg: EnsembleConfig
    quantiles: np.ndarray  # replicas x times, Q_n
    values: np.ndarray  # replicas x times, F_n
    q: np.ndarray = dc_field(repr=False)

    @property
    def times(self):
        return np.asarray(self.cfg.times)

    def mean(self):
        return self.values.mean(axis=0)

    def cov(self):
        return sample_cov(self.values)

    def excess_kurtosis(self):
        c = self.values - self.values.mean(axis=0)
        return np.mean(c**4, axis=0) / np.mean(c**2, axis=0) ** 2 - 3.0


def sample_cov(x) -> np.ndarray:
    """Unbiased covariance of the columns, accumulated in row order, exactly symmetric."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean(axis=0)
    k = c.shape[1]
    out = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            out[a, b] = out[b, a] = np.dot(c[:, a], c[:, b]) / (c.shape[0] - 1)
    return out


def _positions(field: HeatField, n, times, seed, start, stop, salt=_SALT_POSITIONS):
    """Particle positions for replicas ``start:stop``: array (chunk, T, n)."""
    times = np.asarray(times)
    steps = np.sqrt(np.diff(np.concatenate([[0.0], times])))
    out = np.empty((stop - start, times.size, n))
    for r in range(start, stop):
        rng = substream(seed, r, salt)
        x = field.sample_initial(rng, n)
        for k, step in enumerate(steps):
            if step > 0:
                x = x + step * rng.standard_normal(n)
            out[r - start, k] = x
        # duplicate times reuse the same positions
    return out


def _chunks(n, T, replicas):
    size = max(1, _CHUNK_FLOATS // (n * T))
    return [(a, min(a + size, replicas)) for a in range(0, replicas, size)]


def _map_chunks(fn, chunks, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


def order_statistics(field: HeatField, n: int, times, js, replicas: int, seed: int, workers: int = 1):
    """``B_{j:n}(t)`` for each ``j`` in ``js``: array (replicas, T, len(js))."""
    times = tuple(times)
    T = len(times)

    def run(chunk):
        a, b = chunk
        pos = _positions(field, n, times, seed, a, b).reshape(-1, n)
        cols = [select_rows(pos, j, seed=a).reshape(b - a, T) for j in js]
        return np.stack(cols, axis=-1)

    return np.concatenate(_map_chunks(run, _chunks(n, T, replicas), workers))


def simulate_ensemble(cfg: EnsembleConfig, workers: int = 1) -> FluctuationSample:
    """Empirical quantile paths and ``F_n = sqrt(n) (Q_n - q)`` at ``cfg.times``."""
    qn = order_statistics(cfg.field, cfg.n, cfg.times, [cfg.j], cfg.replicas, cfg.seed, workers)[..., 0]
    q = np.asarray(cfg.curve().quantile(np.asarray(cfg.times)))
    return FluctuationSample(cfg, qn, math.sqrt(cfg.n) * (qn - q), q)


def _cov_se(cov, replicas):
    d = np.diag(cov)
    return np.sqrt((np.outer(d, d) + cov**2) / replicas)


def fdd_covariance_check(sample: FluctuationSample, kernel) -> dict:
    """Empirical covariance of ``F_n`` at the sample times against ``rho``."""
    cfg = sample.cfg
    if cfg.replicas < 1000:
        raise DomainError("fdd check needs at least 1000 replicas")
    t = sample.times
    emp = sample.cov()
    ker = np.asarray(kernel.rho(t[:, None], t[None, :]))
    return {
        "times": t.tolist(),
        "n": cfg.n,
        "j": cfg.j,
        "replicas": cfg.replicas,
        "seed": cfg.seed,
        "emp_cov": emp.tolist(),
        "kernel_cov": ker.tolist(),
        "rel_err": (np.abs(emp - ker) / np.abs(ker)).tolist(),
        "se": _cov_se(emp, cfg.replicas).tolist(),
        "kurtosis": sample.excess_kurtosis().tolist(),
        "mean": sample.mean().tolist(),
        "mean_se": (np.sqrt(np.diag(emp) / cfg.replicas)).tolist(),
    }


def fixed_time_bridge_check(cfg: EnsembleConfig, t: float, alphas, workers: int = 1) -> dict:
    """Covariance of ``u(q(a, t), t) F_n(a, t)`` across levels ``a`` at one time.

    The limit is the Brownian bridge covariance ``min(a, b) - a b``.
    """
    alphas = [float(a) for a in alphas]
    if len(alphas) < 2 or any(not 0.0 < a < 1.0 for a in alphas):
        raise DomainError("need at least two levels in (0, 1)")
    js = [order_index(a, cfg.n) for a in alphas]
    stats = order_statistics(cfg.field, cfg.n, [t], js, cfg.replicas, cfg.seed, workers)[:, 0, :]
    curves = [QuantileCurve(cfg.field, a) for a in alphas]
    q = np.array([c.quantile(t) for c in curves])
    u = np.array([c.density_at(t) for c in curves])
    scaled = math.sqrt(cfg.n) * (stats - q) * u
    emp = sample_cov(scaled)
    a = np.asarray(alphas)
    bridge = np.minimum.outer(a, a) - np.outer(a, a)
    return {
        "t": float(t),
        "alphas": alphas,
        "n": cfg.n,
        "replicas": cfg.replicas,
        "seed": cfg.seed,
        "emp_cov": emp.tolist(),
        "bridge_cov": bridge.tolist(),
        "rel_err": (np.abs(emp - bridge) / bridge).tolist(),
        "se": _cov_se(emp, cfg.replicas).tolist(),
    }


def empirical_field_cov(cfg: EnsembleConfig, pt1, pt2, workers: int = 1) -> dict:
    """Covariance of ``sqrt(n)(empirical cdf - cdf)`` at two space-time points.

    Compared with ``P(X(s) <= x, X(t) <= y) - P(X(s) <= x) P(X(t) <= y)``.
    """
    if cfg.replicas < 1000:
        raise DomainError("field covariance check needs at least 1000 replicas")
    (x, s), (y, t) = pt1, pt2
    if s < 0 or t < 0:
        raise DomainError("times must be nonnegative")
    times = sorted({float(s), float(t)})
    col = {tt: i for i, tt in enumerate(times)}
    n = cfg.n
    fld = cfg.field

    def run(chunk):
        a, b = chunk
        pos = _positions(fld, n, times, cfg.seed, a, b)
        return np.stack(
            [np.mean(pos[:, col[s]] <= x, axis=1), np.mean(pos[:, col[t]] <= y, axis=1)], axis=1
        )

    frac = np.concatenate(_map_chunks(run, _chunks(n, len(times), cfg.replicas), workers))
    exact = np.array([fld.cdf(x, s), fld.cdf(y, t)])
    z = math.sqrt(n) * (frac - exact)
    emp = sample_cov(z)[0, 1]
    closed = float(fld.joint_cdf(s, t, x, y) - exact[0] * exact[1])
    return {
        "pt1": [float(x), float(s)],
        "pt2": [float(y), float(t)],
        "n": n,
        "replicas": cfg.replicas,
        "seed": cfg.seed,
        "emp_cov": float(emp),
        "closed_form": closed,
        "rel_err": abs(emp - closed) / abs(closed) if closed else float("inf"),
    }


def tail_check(sample: FluctuationSample, lambdas, kernel=None) -> dict:
    """Empirical ``P(|F_n(t)| > lambda)`` for every time and level.

    With a kernel, also reports the frequency at ``4 sqrt(rho(t, t))`` and
    whether it stays below 1e-3.
    """
    if sample.cfg.replicas < 10_000:
        raise DomainError("tail check needs at least 10^4 replicas")
    lam = np.asarray(lambdas, dtype=float)
    absf = np.abs(sample.values)
    freq = np.mean(absf[:, :, None] > lam[None, None, :], axis=0)
    out = {"times": sample.times.tolist(), "lambdas": lam.tolist(), "freq": freq.tolist()}
    if kernel is not None:
        t = sample.times
        four = 4.0 * np.sqrt(np.asarray(kernel.rho(t, t)))
        f4 = np.mean(absf > four[None, :], axis=0)
        out["four_sigma_level"] = four.tolist()
        out["four_sigma_freq"] = f4.tolist()
        out["pass"] = bool(np.all(f4 < 1e-3))
    return out


def write_fn_csv(sample: FluctuationSample, path) -> None:
    """One row per replica, one column per time."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"t={format(t, '.17g')}" for t in sample.cfg.times])
        for row in sample.values:
            w.writerow([format(float(v), ".17g") for v in row])
