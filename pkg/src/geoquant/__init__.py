"""Complexity-regularized Gaussian-mixture quantization for nonlinear dimensionality reduction."""

from .codebook import Codebook, complexity_phi, length_update, remove_empty, rho, rho0
from .gaussmodel import GaussianModel, kl_gaussian, log_density, regularize_cov, sample
from .kernels import Bump, BumpProfile, Gaussian, InverseDistance, bump_eval, kernel_eval
from .lloyd import FitConfig, FitReport, fit
from .manifold import build_atlas, metric, metric_matrix, partition_weights
from .nldr import (avg_reconstruction_distortion, build_projector, pinsker_mismatch_bound,
                   reconstruct, reduce)
from .synth import EmbeddingSpec, builtin_fixture, sample_embedding, true_log_density

__version__ = "0.1.0"
