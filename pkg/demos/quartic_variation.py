"""Sample the Gaussian limit on a fine grid and look at its roughness.

The quartic variation settles on a deterministic value while the quadratic
one blows up, which is what a Hurst index of 1/4 looks like.
"""
import numpy as np

from qfluct import gp
from qfluct.dist import MixtureDensity
from qfluct.kernel import LimitKernel
from qfluct.quantile import QuantileCurve


def main(grid_n=2048, replicas=8, seed=42):
    kernel = LimitKernel(QuantileCurve.from_mixture(MixtureDensity.standard_normal(), 0.5))
    grid = np.linspace(0.0, 1.0, grid_n + 1)
    cov = kernel.gram(grid)
    sample = gp.sample_gp(kernel, grid, replicas, seed, cov=cov)

    limit = gp.quartic_limit(kernel, 1.0)
    print(f"limit of the quartic variation on [0, 1]: {limit:.4f}")
    for level in (128, 512, grid_n):
        stride = grid_n // level
        sub = gp.GpSample(grid[::stride], sample.paths[:, ::stride], seed, sample.fingerprint)
        quad = np.sum(np.diff(sub.paths, axis=1) ** 2, axis=1).mean()
        quart = gp.quartic_variation(sub, 1.0).mean()
        print(f"  {level:5d} intervals  quadratic {quad:8.3f}  quartic {quart:7.3f}")

    print("exact L2 distance to the limit:")
    for row in gp.quartic_l2_discrepancy(kernel, grid, [128, 512, grid_n], limit=limit, cov=cov):
        print(f"  {row['grid_n']:5d}  mean {row['mean']:.4f}  l2 {row['l2']:.4f}")
    print(f"Hurst estimate from paths {gp.hurst_estimate(sample):.3f}, from kernel {gp.hurst_from_kernel(kernel):.4f}")


if __name__ == "__main__":
    main()
