"""Initial densities, their heat evolution, and normal CDF engines.

The initial law of every particle is a finite Gaussian mixture.  Under the
heat flow each component keeps its mean and gains variance ``t``, so the
density ``u(x, t)``, all its spatial derivatives, and every joint probability
``P(B(s) <= a, B(t) <= b)`` reduce to sums of univariate and bivariate normal
quantities.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
MAX_DERIVATIVE = 4

# 20-point Gauss-Legendre rule on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def norm_cdf(x):
    """Standard normal CDF."""
    return special.ndtr(x)


def norm_sf(x):
    return special.ndtr(np.negative(x))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def norm_ppf(p):
    """Standard normal quantile."""
    return special.ndtri(p)


# Probabilists' Hermite polynomials He_0..He_4.
def _hermite(z, j):
    if j == 0:
        return np.ones_like(z)
    if j == 1:
        return z
    z2 = z * z
    if j == 2:
        return z2 - 1.0
    if j == 3:
        return z * (z2 - 3.0)
    return z2 * (z2 - 6.0) + 3.0


@dataclass(frozen=True)
class MixtureDensity:
    """Finite Gaussian mixture ``sum_k w_k N(m_k, s_k^2)``.

    ``components`` holds ``(weight, mean, std)`` triples.
    """

    components: tuple
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    means: np.ndarray = field(init=False, repr=False, compare=False)
    stds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple((float(w), float(m), float(s)) for w, m, s in self.components)
        if not comps:
            raise DomainError("mixture needs at least one component")
        w = np.array([c[0] for c in comps])
        m = np.array([c[1] for c in comps])
        s = np.array([c[2] for c in comps])
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise DomainError("mixture parameters must be finite")
        if np.any(w <= 0):
            raise DomainError(f"mixture weights must be positive, got {w.tolist()}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"mixture weights sum to {w.sum()!r}, not 1")
        if np.any(s <= 0):
            raise DomainError(f"mixture stds must be positive, got {s.tolist()}")
        object.__setattr__(self, "components", comps)
        for name, arr in (("weights", w), ("means", m), ("stds", s)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def standard_normal(cls) -> "MixtureDensity":
        return cls(((1.0, 0.0, 1.0),))

    @classmethod
    def normalized(cls, components, warn_tol: float = 1e-9) -> "MixtureDensity":
        """Build a mixture after rescaling the weights to sum to one."""
        comps = [(float(w), float(m), float(s)) for w, m, s in components]
        if not comps:
            raise DomainError("mixture needs at least one component")
        total = sum(c[0] for c in comps)
        if not total > 0:
            raise DomainError(f"mixture weights sum to {total!r}")
        if abs(total - 1.0) > warn_tol:
            warnings.warn(f"mixture weights sum to {total:.12g}; normalizing", stacklevel=2)
        return cls(tuple((w / total, m, s) for w, m, s in comps))

    def to_json(self) -> list:
        return [{"w": w, "mean": m, "std": s} for w, m, s in self.components]


@dataclass(frozen=True)
class HeatField:
    """Law of ``B(t)`` when ``B(0)`` is drawn from ``base``.

    Each component evolves to ``N(m_k, s_k^2 + t)``.
    """

    base: MixtureDensity

    def _sigma(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("time must be nonnegative")
        # trailing axis runs over mixture components
        return np.sqrt(self.base.stds**2 + t[..., None])

    def density(self, x, t, j: int = 0):
        """``d^j/dx^j u(x, t)`` in closed form (``0 <= j <= 4``)."""
        if not 0 <= j <= MAX_DERIVATIVE or int(j) != j:
            raise DomainError(f"derivative order must be in 0..{MAX_DERIVATIVE}, got {j}")
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        sig = self._sigma(t)
        z = (x[..., None] - self.base.means) / sig
        sign = -1.0 if j % 2 else 1.0
        terms = self.base.weights * _hermite(z, j) * np.exp(-0.5 * z * z) / (SQRT_2PI * sig ** (j + 1))
        out = sign * terms.sum(axis=-1)
        return out[()] if out.ndim == 0 else out

    def cdf(self, x, t):
        """``P(B(t) <= x)``."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        sig = self._sigma(t)
        out = (self.base.weights * special.ndtr((x[..., None] - self.base.means) / sig)).sum(axis=-1)
        return out[()] if out.ndim == 0 else out

    def sf(self, x, t):
        """``P(B(t) > x)`` without cancellation in the right tail."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        sig = self._sigma(t)
        out = (self.base.weights * special.ndtr((self.base.means - x[..., None]) / sig)).sum(axis=-1)
        return out[()] if out.ndim == 0 else out

    def joint_cdf(self, s, t, a, b):
        """``P(B(s) <= a, B(t) <= b)`` for the same Brownian path.

        Symmetric under ``(s, a) <-> (t, b)``; equals ``cdf(min(a, b), t)``
        when ``s == t``.
        """
        s, t, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, t, a, b)))
        if np.any(s < 0) or np.any(t < 0):
            raise DomainError("times must be nonnegative")
        swap = s > t
        s, t = np.where(swap, t, s), np.where(swap, s, t)
        a, b = np.where(swap, b, a), np.where(swap, a, b)
        var_s = self.base.stds**2 + s[..., None]
        var_t = self.base.stds**2 + t[..., None]
        sig_s, sig_t = np.sqrt(var_s), np.sqrt(var_t)
        r = np.minimum(np.sqrt(var_s / var_t), 1.0)
        h = (a[..., None] - self.base.means) / sig_s
        k = (b[..., None] - self.base.means) / sig_t
        out = (self.base.weights * phi2(h, k, r)).sum(axis=-1)
        return out[()] if out.ndim == 0 else out

    def sample_initial(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw ``B(0)`` from the mixture."""
        z = rng.standard_normal(size)
        if len(self.base.weights) == 1:
            return self.base.means[0] + self.base.stds[0] * z
        u = rng.random(size)
        idx = np.searchsorted(np.cumsum(self.base.weights)[:-1], u, side="right")
        return self.base.means[idx] + self.base.stds[idx] * z


def transition_density(t, x, y):
    """Gaussian kernel ``p(t, x, y) = (2 pi t)^(-1/2) exp(-(x - y)^2 / 2t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("transition density needs t > 0")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.exp(-d * d / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def transition_dt(t, x, y):
    """``d/dt p(t, x, y)``."""
    d2 = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2
    return transition_density(t, x, y) * (d2 / (2.0 * t * t) - 0.5 / t)


def transition_dy(t, x, y):
    """``d/dy p(t, x, y)``."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return transition_density(t, x, y) * d / t


def _bvn_upper(h, k, r):
    """``P(X > h, Y > k)`` for a standard bivariate normal with correlation ``r``.

    Drezner-Genz: Gauss-Legendre quadrature of the arcsine-form integral for
    ``|r| < 0.925`` and the series-corrected integral in ``sqrt(1 - r^2)``
    otherwise.  The 20-point rule is used for every ``r``.
    """
    twopi = 2.0 * np.pi
    hk = h * k
    out = np.empty(np.broadcast(h, k, r).shape)
    h, k, r, hk = np.broadcast_arrays(h, k, r, hk)

    low = np.abs(r) < 0.925
    if np.any(low):
        hl, kl, rl, hkl = h[low], k[low], r[low], hk[low]
        hs = 0.5 * (hl * hl + kl * kl)
        asr = np.arcsin(rl)
        acc = np.zeros_like(hl)
        for x, w in zip(_GL_X, _GL_W):
            sn = np.sin(asr * (x + 1.0) * 0.5)
            acc += w * np.exp((sn * hkl - hs) / (1.0 - sn * sn))
        out[low] = acc * asr / (2.0 * twopi) + special.ndtr(-hl) * special.ndtr(-kl)

    high = ~low
    if np.any(high):
        hh, rh = h[high], r[high]
        kh = np.where(rh < 0, -k[high], k[high])
        hkh = np.where(rh < 0, -hk[high], hk[high])
        bvn = np.zeros_like(hh)
        inner = np.abs(rh) < 1.0
        if np.any(inner):
            hi, ki, ri, hki = hh[inner], kh[inner], rh[inner], hkh[inner]
            a_s = (1.0 - ri) * (1.0 + ri)
            a = np.sqrt(a_s)
            bs = (hi - ki) ** 2
            c = (4.0 - hki) / 8.0
            d = (12.0 - hki) / 16.0
            val = a * np.exp(-(bs / a_s + hki) / 2.0) * (
                1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0
            )
            b = np.sqrt(bs)
            tail = np.exp(-hki / 2.0) * np.sqrt(twopi) * special.ndtr(-b / a) * b * (
                1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0
            )
            val = val - np.where(hki > -160.0, tail, 0.0)
            a = a / 2.0
            for x, w in zip(_GL_X, _GL_W):
                xs = (a * (x + 1.0)) ** 2
                rs = np.sqrt(1.0 - xs)
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    term = np.exp(-(bs / xs + hki) / 2.0) * (
                        np.exp(-hki * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                        - (1.0 + c * xs * (1.0 + d * xs))
                    )
                val = val + a * w * np.where(xs > 0, term, 0.0)
            bvn[inner] = -val / twopi
        pos = rh > 0
        bvn = np.where(
            pos,
            bvn + special.ndtr(-np.maximum(hh, kh)),
            -bvn + np.maximum(0.0, special.ndtr(-hh) - special.ndtr(-kh)),
        )
        out[high] = bvn
    return out


def phi2(h, k, r):
    """``P(Z1 <= h, Z2 <= k)`` for standard normals with correlation ``r``."""
    h, k, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, k, r)))
    if np.any(np.abs(r) > 1.0) or np.any(np.isnan(r)):
        raise DomainError("correlation must lie in [-1, 1]")
    # beyond |z| = 40 the normal CDF is exactly 0 or 1 in double precision
    h = np.clip(h, -40.0, 40.0)
    k = np.clip(k, -40.0, 40.0)
    out = np.clip(_bvn_upper(-h, -k, r), 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def load_config(path) -> tuple[MixtureDensity, dict]:
    """Read ``{"mixture": [{"w", "mean", "std"}, ...], "alpha": ...}``.

    Returns the normalized mixture and the full decoded document.
    """
    doc = json.loads(Path(path).read_text())
    return mixture_from_doc(doc), doc


def mixture_from_doc(doc: dict) -> MixtureDensity:
    try:
        comps = [(c["w"], c["mean"], c["std"]) for c in doc["mixture"]]
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed mixture specification: {exc!r}") from exc
    return MixtureDensity.normalized(comps)
