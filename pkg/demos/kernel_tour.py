"""Walk through the limit covariance for a few starting laws.

Prints the variance profile, the correlation between a fixed time and later
times, and how increments over neighbouring windows anticorrelate.
"""
import numpy as np

from qfluct import presets
from qfluct.kernel import LimitKernel, long_memory_r
from qfluct.quantile import QuantileCurve


def main():
    times = np.array([0.0, 0.25, 0.5, 1.0, 2.0])
    for name in sorted(presets.MIXTURES):
        alpha = presets.MIXTURE_ALPHA[name]
        k = LimitKernel(QuantileCurve.from_mixture(presets.mixture(name), alpha))
        var = np.asarray(k.rho(times, times))
        corr = np.asarray(k.rho(0.5, times)) / np.sqrt(var * k.rho(0.5, 0.5))
        print(f"{name} (alpha={alpha})")
        print("  q(t)     ", np.round(k.curve.quantile(times), 4))
        print("  var F(t) ", np.round(var, 4))
        print("  corr(0.5)", np.round(corr, 4))
        # increments over [0.99, 1] and [1.01, 1.02]
        print(f"  increment cov {k.increment_cov(1.0, 0.01, 1.01, 0.01):.3e}")

    print("\nmedian covariance of unit steps, n^2 r(n) -> -1/6")
    for n in (1, 10, 100, 1000):
        print(f"  n={n:5d}  r={long_memory_r(n): .6e}  n^2 r={n * n * long_memory_r(n): .6f}")


if __name__ == "__main__":
    main()
