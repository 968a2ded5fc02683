"""Run many independent Brownian swarms and track their empirical median.

Compares the spread of sqrt(n)(median - 0) with the limit covariance, and
shows the random-walk sandwich at one gap.
"""
import numpy as np

from qfluct import particles, rw
from qfluct.dist import HeatField, MixtureDensity
from qfluct.kernel import LimitKernel
from qfluct.quantile import QuantileCurve


def main(n=2000, replicas=4000, seed=7):
    field = HeatField(MixtureDensity.standard_normal())
    curve = QuantileCurve(field, 0.5)
    kernel = LimitKernel(curve)
    cfg = particles.EnsembleConfig(field, 0.5, n, (0.0, 0.5, 1.0), replicas, seed)
    sample = particles.simulate_ensemble(cfg)
    rep = particles.fdd_covariance_check(sample, kernel)
    print(f"{replicas} swarms of {n} particles, j = {cfg.j}")
    print("empirical covariance\n", np.round(rep["emp_cov"], 3))
    print("limit covariance\n", np.round(rep["kernel_cov"], 3))

    ctx = rw.GapContext(curve, 0.5, 0.6, y=-0.05)
    sand = rw.sandwich_check(ctx, 200, 20_000, seed, deciles=False)
    print(f"gap law at y={ctx.y}: {sand['lower']:.4f} <= {sand['mid']:.4f} <= {sand['upper']:.4f}")


if __name__ == "__main__":
    main()
