"""Named mixtures and the fixed parameter sets used by the checks and the CLI."""
from __future__ import annotations

from .dist import MixtureDensity

MIXTURES = {
    "symmetric": [(1.0, 0.0, 1.0)],
    "shifted": [(0.7, 0.5, 1.0), (0.3, -1.0, 0.5)],
    "bimodal": [(0.5, -1.5, 0.6), (0.5, 1.5, 0.6)],
}

# level used with each mixture in the multi-mixture checks
MIXTURE_ALPHA = {"symmetric": 0.5, "shifted": 0.3, "bimodal": 0.5}

GP_SEED = 42
PARTICLE_SEED = 7
RW_SEED = 7

# (r1, r2) pairs with mu > 0 at alpha = 1/2, all past the pre-asymptotic rise at n = 100
RWEST_PRESETS = [(0.2, 0.1), (0.3, 0.1), (0.4, 0.2), (0.6, 0.4), (0.8, 0.5)]
RWEST_NS = [100, 1000, 10_000]

SANDWICH_NS = [50, 200, 1000]
SANDWICH_GAPS = [0.2, 0.05, 0.01]
SANDWICH_S = 0.5

TAYLOR_DELTAS = [1e-1, 1e-2, 1e-3]
TAYLOR_XS = [0.0, 0.01, -0.01]


def mixture(name: str) -> MixtureDensity:
    try:
        return MixtureDensity(tuple(MIXTURES[name]))
    except KeyError:
        raise KeyError(f"unknown mixture preset {name!r}; choose from {sorted(MIXTURES)}") from None


def sandwich_y(gap: float, n: int) -> float:
    """Half the natural scale ``gap^(1/4) / sqrt(n)`` of a quantile increment, below zero."""
    return -0.5 * gap**0.25 / n**0.5


def taylor_ys(delta: float):
    return [delta**0.6, -(delta**0.6), 1e-3, -1e-3]
