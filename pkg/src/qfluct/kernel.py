"""Covariance kernel of the limiting fluctuation process and its derivatives.

``rho_tilde(s, t) = P(B(s) <= q(s), B(t) <= q(t)) - alpha^2`` is the
covariance of ``u(q(t), t) F(t)``; ``rho = theta(s) theta(t) rho_tilde`` is the
covariance of ``F``.  The first and mixed derivatives of ``rho_tilde`` have
closed forms in terms of the Gaussian transition kernel, which are used here
directly.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dist import transition_density, transition_dt, transition_dy
from .errors import DomainError
from .quantile import QuantileCurve


def _times(*arrays):
    out = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in arrays))
    if any(np.any(a < 0) for a in out):
        raise DomainError("times must be nonnegative")
    return out


def _scalar(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


@dataclass(frozen=True)
class LimitKernel:
    """Kernel evaluator bound to one quantile curve.

    ``delta0`` is the gap below which the derivative sign pattern is expected
    to hold; sweeps report violations instead of raising.
    """

    curve: QuantileCurve
    delta0: float = 0.5

    @property
    def alpha(self) -> float:
        return self.curve.alpha

    @property
    def field(self):
        return self.curve.field

    def _joint(self, s, t, qs, qt):
        return self.field.joint_cdf(s, t, qs, qt) - self.alpha**2

    def rho_tilde(self, s, t):
        s, t = _times(s, t)
        return _scalar(self._joint(s, t, self.curve.quantile(s), self.curve.quantile(t)))

    def rho(self, s, t):
        s, t = _times(s, t)
        qs, qt = self.curve.quantile(s), self.curve.quantile(t)
        us, ut = self.field.density(qs, s), self.field.density(qt, t)
        return _scalar(self._joint(s, t, qs, qt) / (us * ut))

    def d_s_rho_tilde(self, s, t):
        """``d/ds rho_tilde(s, t) = p(t - s, q(s), q(t)) u(q(s), s) / 2`` for ``s < t``."""
        s, t = _times(s, t)
        if np.any(s >= t):
            raise DomainError("closed-form derivative needs s < t")
        qs, qt = self.curve.quantile(s), self.curve.quantile(t)
        return _scalar(0.5 * transition_density(t - s, qs, qt) * self.field.density(qs, s))

    def d2_st_rho_tilde(self, s, t):
        """Mixed derivative ``d^2/(ds dt) rho_tilde(s, t)`` for ``s < t``."""
        s, t = _times(s, t)
        if np.any(s >= t):
            raise DomainError("closed-form derivative needs s < t")
        qs, qt = self.curve.quantile(s), self.curve.quantile(t)
        us = self.field.density(qs, s)
        dq_t = self.curve.ode_rhs(t)
        gap = t - s
        val = 0.5 * us * (transition_dt(gap, qs, qt) + transition_dy(gap, qs, qt) * dq_t)
        return _scalar(val)

    def msd(self, s, t):
        """``E|F(t) - F(s)|^2``."""
        s, t = _times(s, t)
        val = self.rho(s, s) + self.rho(t, t) - 2.0 * self.rho(s, t)
        return _scalar(np.maximum(val, 0.0))

    def increment_cov(self, s, ds, t, dt):
        """``E[(F(s) - F(s - ds)) (F(t + dt) - F(t))]`` for ``0 <= s-ds < s < t < t+dt``."""
        s, ds, t, dt = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, ds, t, dt)))
        if np.any(ds <= 0) or np.any(dt <= 0) or np.any(s - ds < 0) or np.any(s >= t):
            raise DomainError("increment_cov needs 0 <= s-ds < s < t < t+dt")
        val = (
            self.rho(s, t + dt)
            - self.rho(s, t)
            - self.rho(s - ds, t + dt)
            + self.rho(s - ds, t)
        )
        return _scalar(val)

    def gram(self, grid, tilde: bool = False, workers: int = 1, block: int = 256) -> np.ndarray:
        """Kernel matrix on ``grid``, assembled in row blocks.

        Each entry depends only on its own pair of times, so the result does not
        depend on ``workers``.
        """
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or np.any(grid < 0):
            raise DomainError("grid must be a 1-d array of nonnegative times")
        n = grid.size
        q = self.curve.quantile(grid)
        scale = np.ones(n) if tilde else 1.0 / self.field.density(q, grid)
        out = np.empty((n, n))

        def fill(start):
            stop = min(start + block, n)
            # upper triangle of the block rows, columns from `start` on
            s = grid[start:stop, None]
            qs = q[start:stop, None]
            rows = self._joint(s, grid[None, start:], qs, q[None, start:])
            rows *= scale[start:stop, None] * scale[None, start:]
            out[start:stop, start:] = rows

        starts = range(0, n, block)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(fill, starts))
        else:
            for start in starts:
                fill(start)
        iu = np.triu_indices(n, 1)
        out[(iu[1], iu[0])] = out[iu]
        return out

    def bracket_sweep(self, s: float, gaps) -> dict:
        """Scaled derivatives along ``t = s + gap``.

        Returns ``ds_rho_tilde * gap^(1/2)`` and ``-d2st_rho_tilde * gap^(3/2)``
        with their ranges, and lists gaps at or below ``delta0`` where the sign
        pattern (positive first derivative, negative mixed derivative) fails.
        """
        gaps = np.asarray(gaps, dtype=float)
        t = s + gaps
        d1 = np.asarray(self.d_s_rho_tilde(s, t))
        d2 = np.asarray(self.d2_st_rho_tilde(s, t))
        first = d1 * np.sqrt(gaps)
        second = -d2 * gaps**1.5
        small = gaps <= self.delta0
        violations = gaps[small & ((d1 <= 0) | (d2 >= 0))].tolist()
        return {
            "gaps": gaps.tolist(),
            "first_scaled": first.tolist(),
            "second_scaled": second.tolist(),
            "first_bracket": (float(first.min()), float(first.max())),
            "second_bracket": (float(second.min()), float(second.max())),
            "sign_violations": violations,
        }


def medcov(s, t):
    """``sqrt(st) arcsin(min(s, t) / sqrt(st))`` for ``s, t > 0``."""
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    if np.any(s <= 0) or np.any(t <= 0):
        raise DomainError("medcov needs positive times")
    root = np.sqrt(s * t)
    return _scalar(root * np.arcsin(np.minimum(np.minimum(s, t) / root, 1.0)))


# arcsin(x)/x = sum_k A_k x^(2k),  A_k = (2k)! / (4^k (k!)^2 (2k + 1))
_ASIN_COEF = [math.comb(2 * k, k) / (4**k * (2 * k + 1)) for k in range(60)]


def long_memory_r(n: int) -> float:
    """``E[X(1)(X(n+1) - X(n))]`` for the median-of-Gaussians covariance.

    Equals ``g(n+1) - g(n)`` with ``g(m) = sqrt(m) arcsin(m^(-1/2))``.  For
    ``n >= 8`` the difference is summed term by term from the arcsine series,
    avoiding the cancellation of two numbers close to one.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    n = int(n)
    if n < 8:
        g = lambda m: math.sqrt(m) * math.asin(1.0 / math.sqrt(m))
        return g(n + 1) - g(n)
    total = 0.0
    lg = math.log1p(1.0 / n)
    for k in range(len(_ASIN_COEF) - 1, 0, -1):
        # (n+1)^-k - n^-k without cancellation
        total += _ASIN_COEF[k] * n ** (-k) * math.expm1(-k * lg)
    return total


def write_kernel_csv(kernel: LimitKernel, grid, path) -> int:
    """Write ``s,t,rho,rho_tilde,ds_rho_tilde,d2st_rho_tilde`` for every grid pair.

    Derivative columns are ``nan`` where ``s >= t``.  Returns the row count.
    """
    grid = np.asarray(grid, dtype=float)
    s, t = np.meshgrid(grid, grid, indexing="ij")
    s, t = s.ravel(), t.ravel()
    rt = np.asarray(kernel.rho_tilde(s, t))
    theta = np.asarray(kernel.curve.theta(grid))
    th_s, th_t = np.meshgrid(theta, theta, indexing="ij")
    rho = rt * th_s.ravel() * th_t.ravel()
    d1 = np.full(s.shape, np.nan)
    d2 = np.full(s.shape, np.nan)
    lower = s < t
    if np.any(lower):
        d1[lower] = kernel.d_s_rho_tilde(s[lower], t[lower])
        d2[lower] = kernel.d2_st_rho_tilde(s[lower], t[lower])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "t", "rho", "rho_tilde", "ds_rho_tilde", "d2st_rho_tilde"])
        for row in zip(s, t, rho, rt, d1, d2):
            w.writerow([format(float(v), ".17g") for v in row])
    return s.size
