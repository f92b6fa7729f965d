"""Smoothing kernels and smooth compactly supported bump profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_D_MIN = 1e-9


def _h(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def smooth_step_down(theta):
    """C-infinity step going from 1 at theta <= 0 to 0 at theta >= 1."""
    theta = np.clip(np.asarray(theta, dtype=float), 0.0, 1.0)
    a = _h(1.0 - theta)
    b = _h(theta)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    """Radial profile equal to 1 on [0, r_inner] and 0 on [r_outer, inf)."""

    r_inner: float
    r_outer: float

    def __post_init__(self):
        if self.r_inner < 0 or not self.r_outer > self.r_inner:
            raise ValueError(
                f"need 0 <= r_inner < r_outer, got ({self.r_inner}, {self.r_outer})"
            )

    def __call__(self, t):
        return bump_eval(self, t)


def bump_eval(p: BumpProfile, t):
    """Evaluate the bump profile at distance(s) ``t`` >= 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("bump profile evaluated at negative distance")
    theta = (t_arr - p.r_inner) / (p.r_outer - p.r_inner)
    out = np.where(t_arr <= p.r_inner, 1.0,
                   np.where(t_arr >= p.r_outer, 0.0, smooth_step_down(theta)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class InverseDistance:
    d_min: float = DEFAULT_D_MIN

    name = "inverse_distance"

    def profile(self, dist, n):
        return 1.0 / np.maximum(dist, self.d_min)

    def params(self) -> dict:
        return {"d_min": self.d_min}


@dataclass(frozen=True)
class Gaussian:
    sigma: float

    name = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Gaussian kernel needs sigma > 0")

    def profile(self, dist, n):
        s2 = self.sigma ** 2
        return (2.0 * np.pi * s2) ** (-0.5 * n) * np.exp(-np.square(dist) / (2.0 * s2))

    def params(self) -> dict:
        return {"sigma": self.sigma}


@dataclass(frozen=True)
class Bump:
    r1: float
    r2: float

    name = "bump"

    def __post_init__(self):
        if not (0 < self.r1 < self.r2):
            raise ValueError("Bump kernel needs 0 < r1 < r2")

    def profile(self, dist, n):
        return bump_eval(BumpProfile(self.r1, self.r2), dist)

    def params(self) -> dict:
        return {"r1": self.r1, "r2": self.r2}


KernelSpec = InverseDistance | Gaussian | Bump

KERNELS = {cls.name: cls for cls in (InverseDistance, Gaussian, Bump)}


def kernel_from_dict(d: dict) -> KernelSpec:
    d = dict(d)
    variant = d.pop("variant")
    try:
        cls = KERNELS[variant]
    except KeyError:
        raise ValueError(f"unknown kernel {variant!r}; expected one of {sorted(KERNELS)}") from None
    try:
        return cls(**{k: float(v) for k, v in d.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for kernel {variant!r}: {exc}") from None


def kernel_to_dict(spec: KernelSpec) -> dict:
    return {"variant": spec.name, **spec.params()}


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    dist = float(np.linalg.norm(x - x2))
    return float(spec.profile(dist, x.size))


def kernel_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Pairwise kernel weights between rows of ``points`` with a zero diagonal."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    diff = P[:, None, :] - P[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    K = np.asarray(spec.profile(dist, P.shape[1]), dtype=float)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 0.0)
    return K
