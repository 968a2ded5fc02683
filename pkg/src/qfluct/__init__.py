"""Fluctuations of empirical quantiles of independent Brownian particles.

The deterministic quantile curve of the heat-evolved density, the covariance
kernel of the Gaussian limit of the rescaled fluctuations, samplers for that
limit, particle simulations, and exact random-walk comparison probabilities.
"""
from .dist import HeatField, MixtureDensity, phi2
from .errors import DomainError, NumericError
from .kernel import LimitKernel, long_memory_r, medcov
from .quantile import QuantileCurve

__all__ = [
    "DomainError",
    "HeatField",
    "LimitKernel",
    "MixtureDensity",
    "NumericError",
    "QuantileCurve",
    "long_memory_r",
    "medcov",
    "phi2",
]
__version__ = "0.1.0"
