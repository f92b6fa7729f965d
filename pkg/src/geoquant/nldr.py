"""Local-PCA reduction and reconstruction maps over the encoder partition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook
from .lloyd import data_diameter, encode_step


@dataclass(frozen=True)
class ChartProjector:
    """Per-component top-k eigenvector frames, shape (M, k, n), and means (M, n)."""

    frames: np.ndarray
    means: np.ndarray

    @property
    def k(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


def build_projector(cb: Codebook, k: int) -> ChartProjector:
    n = cb.dim
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n={n}, got k={k}")
    frames = np.stack([g.eigvecs[:, :k].T for g in cb.models])
    return ChartProjector(frames, cb.means)


@dataclass(frozen=True)
class ReducedPoint:
    """Chart index and chart coordinates; arrays when reducing a batch."""

    chart: int | np.ndarray
    coords: np.ndarray


def reduce(cb: Codebook, proj: ChartProjector, x, threads: int = 1) -> ReducedPoint:
    """Encode with the minimum-rho0 rule, then project onto that chart's frame."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != cb.dim:
        raise ValueError(f"dimension mismatch: model n={cb.dim}, input {X.shape[1]}")
    charts, _ = encode_step(cb, X, threads)
    coords = np.einsum("ikn,in->ik", proj.frames[charts], X - proj.means[charts])
    if single:
        return ReducedPoint(int(charts[0]), coords[0])
    return ReducedPoint(charts, coords)


def reconstruct(proj: ChartProjector, p: ReducedPoint) -> np.ndarray:
    """mean_m + sum_i u_i e_i for each (m, u)."""
    charts = np.asarray(p.chart)
    coords = np.asarray(p.coords, dtype=float)
    if charts.ndim == 0:
        return proj.means[int(charts)] + coords @ proj.frames[int(charts)]
    if coords.shape != (charts.size, proj.k):
        raise ValueError(f"coords must have shape ({charts.size}, {proj.k})")
    return proj.means[charts] + np.einsum("ik,ikn->in", coords, proj.frames[charts])


def avg_reconstruction_distortion(cb: Codebook, proj: ChartProjector, data) -> float:
    """Empirical mean squared error of x -> reconstruct(reduce(x))."""
    X = np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty data")
    rec = reconstruct(proj, reduce(cb, proj, X))
    return float(np.mean(np.sum((X - rec) ** 2, axis=1)))


def default_distortion_bound(data) -> float:
    """Squared diameter of the sample, a bound on squared error over its hull."""
    return data_diameter(data) ** 2


def pinsker_mismatch_bound(ibar: float, phi_avg: float, mu: float, dist_bound_A: float) -> float:
    """A * sqrt(2 (ibar - mu * phi_avg)), the mismatch bound for the composite coder."""
    if not dist_bound_A > 0:
        raise ValueError("distortion bound A must be positive")
    rad = ibar - mu * phi_avg
    if rad < 0:
        raise ValueError(
            f"negative radicand ibar - mu*phi_avg = {rad:.6g}; estimates are inconsistent"
        )
    return dist_bound_A * math.sqrt(2.0 * rad)
