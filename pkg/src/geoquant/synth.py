"""Noisy Gaussian chart embeddings: synthetic data with an exact density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussmodel import GaussianModel, log_density


@dataclass(frozen=True, eq=False)
class EmbeddingSpec:
    """Mixture over charts l of N(mean_l + A_l y, Sigma_l) with y ~ N(0, I_k).

    weights (L,), means (L, n), A (L, n, k), Sigma (L, n, n).
    """

    weights: np.ndarray
    means: np.ndarray
    A: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        A = np.asarray(self.A, dtype=float)
        S = np.asarray(self.Sigma, dtype=float)
        L, n = mu.shape
        if A.ndim != 3 or A.shape[:2] != (L, n):
            raise ValueError(f"A must have shape ({L}, {n}, k), got {A.shape}")
        if S.shape != (L, n, n):
            raise ValueError(f"Sigma must have shape ({L}, {n}, {n}), got {S.shape}")
        if w.size != L or np.any(w <= 0) or abs(w.sum() - 1) > 1e-9:
            raise ValueError("chart weights must be positive and sum to 1")
        if not A.shape[2] < n:
            raise ValueError("need k < n")
        for name, arr in (("weights", w), ("means", mu), ("A", A), ("Sigma", S)):
            object.__setattr__(self, name, arr)
        # validates SPD of every chart covariance
        object.__setattr__(self, "_components", tuple(
            GaussianModel(mu[l], A[l] @ A[l].T + S[l]) for l in range(L)))

    @property
    def n(self) -> int:
        return self.means.shape[1]

    @property
    def k(self) -> int:
        return self.A.shape[2]

    @property
    def components(self) -> tuple:
        return self._components

    def log_density(self, X):
        return true_log_density(self, X)

    def sample(self, N: int, seed: int) -> np.ndarray:
        return sample_embedding(self, N, seed).points


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    latents: np.ndarray | None = None


def sample_embedding(spec: EmbeddingSpec, N: int, seed: int) -> Dataset:
    """Draw chart l, latent y ~ N(0, I_k), then x ~ N(mean_l + A_l y, Sigma_l)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(spec.weights.size, size=N, p=spec.weights)
    y = rng.standard_normal((N, spec.k))
    z = rng.standard_normal((N, spec.n))
    chol = np.linalg.cholesky(spec.Sigma)
    x = (spec.means[labels]
         + np.einsum("ink,ik->in", spec.A[labels], y)
         + np.einsum("inj,ij->in", chol[labels], z))
    return Dataset(x, labels, y)


def true_log_density(spec: EmbeddingSpec, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    comp = np.stack([np.log(w) + log_density(g, X)
                     for w, g in zip(spec.weights, spec.components)], axis=1)
    top = comp.max(axis=1, keepdims=True)
    out = (top + np.log(np.exp(comp - top).sum(axis=1, keepdims=True)))[:, 0]
    return float(out[0]) if single else out


def _two_charts_2d(seed):
    return EmbeddingSpec(
        weights=[0.5, 0.5],
        means=[[0.0, 0.0], [4.0, 0.0]],
        A=[[[1.0], [0.0]], [[1.0], [0.0]]],
        Sigma=[0.01 * np.eye(2)] * 2,
    )


def _arc_3d_k1(seed, n_charts=6, radius=3.0, noise=0.05):
    # charts spread over a half circle in the z = 0 plane, tangent frames along the arc
    theta = np.linspace(0.0, np.pi, n_charts)
    means = np.stack([radius * np.cos(theta), radius * np.sin(theta), np.zeros_like(theta)], axis=1)
    tangents = np.stack([-np.sin(theta), np.cos(theta), np.zeros_like(theta)], axis=1)
    spacing = radius * np.pi / (n_charts - 1)
    A = 0.5 * spacing * tangents[:, :, None]
    return EmbeddingSpec(
        weights=np.full(n_charts, 1.0 / n_charts),
        means=means,
        A=A,
        Sigma=np.stack([noise ** 2 * np.eye(3)] * n_charts),
    )


def _clusters_5d_k2(seed, n_charts=4):
    rng = np.random.default_rng(seed)
    means = 6.0 * rng.standard_normal((n_charts, 5))
    A = np.stack([np.linalg.qr(rng.standard_normal((5, 2)))[0] for _ in range(n_charts)])
    return EmbeddingSpec(
        weights=np.full(n_charts, 1.0 / n_charts),
        means=means,
        A=A,
        Sigma=np.stack([0.01 * np.eye(5)] * n_charts),
    )


FIXTURES = {
    "two-charts-2d": _two_charts_2d,
    "arc-3d-k1": _arc_3d_k1,
    "clusters-5d-k2": _clusters_5d_k2,
}


def builtin_fixture(name: str, seed: int = 0) -> EmbeddingSpec:
    """Named regression fixtures; ``seed`` only affects randomized ones."""
    try:
        make = FIXTURES[name]
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; valid names: {', '.join(FIXTURES)}") from None
    return make(seed)
