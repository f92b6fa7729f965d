"""Gaussian codebooks, geometric complexity, and the encoder distortions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussmodel import GaussianModel, log_density
from .kernels import KernelSpec, kernel_matrix

KRAFT_TOL = 1e-9


def pairwise_kl(models) -> np.ndarray:
    """Matrix D with D[j, i] = D(g_j || g_i) for every ordered pair."""
    means = np.stack([g.mean for g in models])
    covs = np.stack([g.cov for g in models])
    logdets = np.array([g.log_det_cov for g in models])
    precs = np.stack([g.precision() for g in models])
    n = means.shape[1]
    # tr(P_i K_j) indexed [i, j]
    tr = np.einsum("iab,jba->ij", precs, covs)
    diff = means[:, None, :] - means[None, :, :]
    quad = np.einsum("ija,iab,ijb->ij", diff, precs, diff)
    to_i = 0.5 * (logdets[:, None] - logdets[None, :] + tr + quad - n)
    D = np.maximum(to_i.T, 0.0)
    np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True)
class ComplexityCache:
    kappa: np.ndarray
    kl: np.ndarray
    phi: np.ndarray


def build_cache(models, kernel: KernelSpec) -> ComplexityCache:
    if len(models) == 1:
        z = np.zeros((1, 1))
        return ComplexityCache(z, z.copy(), np.zeros(1))
    kappa = kernel_matrix(kernel, np.stack([g.mean for g in models]))
    kl = pairwise_kl(models)
    # phi_m = sum_{m' != m} kappa(m, m') D(g_m' || g_m)
    phi = np.einsum("mj,jm->m", kappa, kl)
    return ComplexityCache(kappa, kl, phi)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Indexed Gaussian components with weights p_m and lengths l_m (nats).

    ``mu`` is the trade-off between mismatch and geometric complexity. The
    complexity cache is derived from the models and kernel at construction.
    """

    models: tuple
    weights: np.ndarray
    lengths: np.ndarray
    kernel: KernelSpec
    mu: float
    cache: ComplexityCache = field(init=False, repr=False)

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValueError("codebook needs at least one component")
        n = models[0].dim
        if any(g.dim != n for g in models):
            raise ValueError("codebook components have different dimensions")
        w = np.array(self.weights, dtype=float).reshape(-1)
        ln = np.array(self.lengths, dtype=float).reshape(-1)
        if w.size != len(models) or ln.size != len(models):
            raise ValueError("weights/lengths do not match number of components")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
        if np.any(ln < 0) or np.sum(np.exp(-ln)) > 1.0 + KRAFT_TOL:
            raise ValueError("lengths violate the Kraft inequality")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        w.setflags(write=False)
        ln.setflags(write=False)
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lengths", ln)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "cache", build_cache(models, self.kernel))

    def __len__(self):
        return len(self.models)

    @property
    def dim(self) -> int:
        return self.models[0].dim

    @property
    def means(self) -> np.ndarray:
        return np.stack([g.mean for g in self.models])

    def kraft_sum(self) -> float:
        return float(np.sum(np.exp(-self.lengths)))

    def replace(self, **changes) -> "Codebook":
        kw = dict(models=self.models, weights=self.weights, lengths=self.lengths,
                  kernel=self.kernel, mu=self.mu)
        kw.update(changes)
        return Codebook(**kw)

    def rho0_matrix(self, X) -> np.ndarray:
        """(N, M) array of rho0(X_i, m)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: codebook n={self.dim}, data {X.shape[1]}")
        penalty = self.lengths + self.mu * self.cache.phi
        out = np.empty((X.shape[0], len(self)))
        for m, g in enumerate(self.models):
            out[:, m] = -log_density(g, X) + penalty[m]
        return out

    def mixture_log_density(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        comp = np.stack([log_density(g, X) for g in self.models], axis=1) + logw
        top = np.max(comp, axis=1, keepdims=True)
        return (top + np.log(np.sum(np.exp(comp - top), axis=1, keepdims=True)))[:, 0]


def complexity_phi(cb: Codebook, m: int) -> float:
    return float(cb.cache.phi[m])


def rho0(cb: Codebook, x, m: int) -> float:
    """-ln g_m(x) + l_m + mu * phi_m."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cb.dim,):
        raise ValueError(f"dimension mismatch: codebook n={cb.dim}, x has shape {x.shape}")
    return -log_density(cb.models[m], x) + cb.lengths[m] + cb.mu * cb.cache.phi[m]


def rho(cb: Codebook, x, m: int, log_f: float) -> float:
    """The full distortion ln(f(x)/g_m(x)) + l_m + mu * phi_m, given ln f(x)."""
    return log_f + rho0(cb, x, m)


def length_update(cb: Codebook) -> Codebook:
    """Set l_m = -ln p_m, which makes the Kraft sum exactly one."""
    if np.any(cb.weights <= 0):
        raise ValueError("length_update needs every weight > 0; remove empty cells first")
    return cb.replace(lengths=-np.log(cb.weights))


def remove_empty(cb: Codebook, counts) -> Codebook:
    """Drop components whose cell is empty and renormalize the surviving weights."""
    counts = np.asarray(counts)
    if counts.shape != (len(cb),):
        raise ValueError("counts must have one entry per component")
    keep = np.flatnonzero(counts > 0)
    if keep.size == 0:
        raise ValueError("every cell is empty")
    if keep.size == len(cb):
        return cb
    w = counts[keep].astype(float)
    return cb.replace(
        models=tuple(cb.models[i] for i in keep),
        weights=w / w.sum(),
        lengths=cb.lengths[keep],
    )
