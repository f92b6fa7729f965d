"""
Fitting a Gaussian codebook to two noisy line segments
======================================================

Two charts in the plane, each a thin Gaussian stretched along the x-axis.
"""

import numpy as np

from geoquant import FitConfig, fit
from geoquant.synth import builtin_fixture

# the fixture has an exact density, which we use at the end
spec = builtin_fixture("two-charts-2d")
X = spec.sample(2000, seed=1)
print("data:", X.shape)

# start from 8 cells; cells that lose every sample are dropped along the way
report = fit(X, FitConfig(m_init=8, mu=0.5, seed=1))
cb = report.final_codebook
print(f"iterations {report.iterations}, cells kept {len(cb)}, removed {report.removed_cells}")
print("distortion trace:", np.round(report.distortion_trace, 4))

for m, g in enumerate(cb.models):
    print(f"cell {m}: p={cb.weights[m]:.3f} mean={np.round(g.mean, 2)} "
          f"eigenvalues={np.round(g.eigvals, 4)}")

# codelengths -ln p satisfy Kraft with equality
print("Kraft sum:", cb.kraft_sum())

# average log-likelihood gap to the true density on fresh data
T = spec.sample(20000, seed=2)
print("KL(f* || mixture) ~", float(np.mean(spec.log_density(T) - cb.mixture_log_density(T))))
