"""Build, evaluate, fit and serialize Gaussian kernel mixtures.

Run with ``python3 demos/mixture_basics.py``.
"""

import numpy as np

from kernelfilter import BoostConfig, KernelMixture, TargetFunction, boost_fit
from kernelfilter.mixture import dumps

rng = np.random.default_rng(0)

# A two-component mixture in 2-D. Weights multiply normalized densities.
mix = KernelMixture.from_arrays(
    [0.6, 0.4],
    [[-1.0, 0.0], [1.5, 1.0]],
    [[[0.5, 0.1], [0.1, 0.3]], [[0.4, 0.0], [0.0, 0.6]]],
)
x = np.array([[0.0, 0.0], [1.5, 1.0]])
print("density:", mix.evaluate(x))
print("gradient at the origin:", mix.gradient(x[0]))
mean, cov = mix.moments()
print("mean:", mean)
print("covariance:\n", cov)

# Draws follow the mixture; their mean approaches the analytic one.
draws = mix.sample(50_000, rng)
print("sample mean:", draws.mean(axis=0))

# Greedy boosting recovers the mixture from pointwise evaluations alone.
proposal = KernelMixture.gaussian([0.0, 0.0], 4 * np.eye(2))
fitted, diag = boost_fit(TargetFunction(mix.evaluate, proposal),
                         BoostConfig(full_covariance=True, tol=1e-5), rng)
print(f"boosting used {len(fitted)} kernels ({diag.stop_reason}); "
      f"error trace: {['%.2e' % e for e in diag.global_errors]}")

# Plain-text round trip.
print(dumps(fitted))
