"""
Density-estimation error as the sample grows
============================================

For a single Gaussian target, fits on larger samples approach the target in
relative entropy. The number of initial cells grows like sqrt(N).
"""

import numpy as np

from geoquant import FitConfig
from geoquant.diagnostics import consistency_sweep, theorem1_bound
from geoquant.synth import EmbeddingSpec

K = np.array([[1.0, 0.3], [0.3, 0.5]])
f_star = EmbeddingSpec([1.0], [[0.0, 0.0]], [[[0.0], [0.0]]], [K])

rows = consistency_sweep(FitConfig(mu=1.0), f_star, [500, 1000, 2000, 4000, 8000], seeds=range(5))
print("    N  m_init  median KL   cells kept   m_init/N")
for r in rows:
    print(f"{r.N:5d}  {r.m_init:6d}  {r.median_kl:9.4f}   {str(r.sizes):12s} {r.m_init_ratio:.4f}")

# bound arithmetic for the largest sample, with user-supplied constants h and M(f*)
last = rows[-1]
r_index = float(np.median(last.r_index))
prob, exp = theorem1_bound(r_index, M_size=int(np.median(last.sizes)), mu=1.0, h=0.1, M_fstar=0.5,
                           N=last.N, delta=0.05)
print(f"resolvability {r_index:.4f}: probability bound {prob:.4f}, expectation bound {exp:.4f}")
