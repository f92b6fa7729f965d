"""
Dimension reduction and reconstruction on an arc
================================================

Points near a half circle in 3-D are reduced to one coordinate per chart.
"""

import numpy as np

from geoquant import FitConfig, fit
from geoquant.codebook import Codebook
from geoquant.gaussmodel import GaussianModel
from geoquant.kernels import Gaussian
from geoquant.nldr import avg_reconstruction_distortion, build_projector, reconstruct, reduce
from geoquant.synth import builtin_fixture

X = builtin_fixture("arc-3d-k1").sample(3000, seed=0)
cb = fit(X, FitConfig(m_init=8, mu=0.5, seed=0)).final_codebook
proj = build_projector(cb, k=1)

# each point becomes (chart index, one coordinate along that chart's main axis)
red = reduce(cb, proj, X[:5])
for x, m, u in zip(X[:5], red.chart, red.coords):
    print(f"x={np.round(x, 3)} -> chart {m}, u={u[0]: .3f}")

# mapping back lands on the chart's principal line through its mean
back = reconstruct(proj, red)
print("reconstruction error of the first points:", np.round(np.linalg.norm(X[:5] - back, axis=1), 4))

# one global PCA line cannot follow the bend; the local charts can
pca = Codebook((GaussianModel(X.mean(axis=0), np.cov(X, rowvar=False, bias=True)),),
               [1.0], [0.0], Gaussian(1.0), 0.0)
print(f"mean squared error, {len(cb)} charts:", avg_reconstruction_distortion(cb, proj, X))
print("mean squared error, single PCA line:",
      avg_reconstruction_distortion(pca, build_projector(pca, 1), X))
