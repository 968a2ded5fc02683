"""The deterministic alpha-quantile trajectory of the heat-evolved law."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import HeatField, MixtureDensity
from .errors import DomainError, NumericError

_MAX_DOUBLINGS = 200
_MAX_ITER = 200


@dataclass(frozen=True)
class QuantileCurve:
    """``q(t)`` solving ``P(B(t) <= q(t)) = alpha``.

    ``q`` is found by a safeguarded Newton iteration inside a bisection
    bracket, so no error accumulates in ``t``.  The ODE
    ``q'(t) = -u_x(q, t) / (2 u(q, t))`` is exposed separately through
    :meth:`ode_rhs` for checking.
    """

    field: HeatField
    alpha: float
    tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.tol > 0:
            raise DomainError("solver tolerance must be positive")

    @classmethod
    def from_mixture(cls, mixture: MixtureDensity, alpha: float, tol: float = 1e-12):
        return cls(HeatField(mixture), alpha, tol)

    def _bracket(self, t):
        mix = self.field.base
        scale = np.sqrt(mix.stds.max() ** 2 + t)
        center = 0.5 * (mix.means.min() + mix.means.max())
        half = 0.5 * (mix.means.max() - mix.means.min()) + 10.0 * scale
        for _ in range(_MAX_DOUBLINGS):
            lo, hi = center - half, center + half
            ok = (self.field.cdf(lo, t) < self.alpha) & (self.field.cdf(hi, t) > self.alpha)
            if np.all(ok):
                return lo, hi
            half = np.where(ok, half, 2.0 * half)
        raise NumericError("could not bracket the quantile after 200 doublings")

    def quantile(self, t):
        """``q(t)``; accepts scalars or arrays of nonnegative times."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("time must be nonnegative")
        lo, hi = self._bracket(t)
        x = 0.5 * (lo + hi)
        alpha = self.alpha
        done = np.zeros(t.shape, dtype=bool)
        for _ in range(_MAX_ITER):
            resid = self.field.cdf(x, t) - alpha
            lo = np.where(resid < 0, x, lo)
            hi = np.where(resid > 0, x, hi)
            dens = self.field.density(x, t)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = resid / dens
            x_new = x - step
            inside = np.isfinite(x_new) & (x_new > lo) & (x_new < hi)
            x_new = np.where(inside, x_new, 0.5 * (lo + hi))
            x_new = np.where(done | (resid == 0), x, x_new)
            small = np.abs(x_new - x) <= 4e-16 * np.maximum(1.0, np.abs(x))
            done = done | (small & (np.abs(resid) <= self.tol))
            x = x_new
            if np.all(done):
                break
        resid = np.abs(self.field.cdf(x, t) - alpha)
        if np.any(resid > self.tol):
            raise NumericError(f"quantile residual {resid.max():.3g} exceeds {self.tol:.3g}")
        return x[()] if x.ndim == 0 else x

    def density_at(self, t):
        """``u(q(t), t)``."""
        return self.field.density(self.quantile(t), t)

    def theta(self, t):
        """``1 / u(q(t), t)``, the factor converting the tilde process to F."""
        return 1.0 / self.density_at(t)

    def ode_rhs(self, t):
        """``-u_x(q(t), t) / (2 u(q(t), t))``; defined for ``t > 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("the quantile ODE is stated for t > 0")
        q = self.quantile(t)
        return -self.field.density(q, t, 1) / (2.0 * self.field.density(q, t, 0))
