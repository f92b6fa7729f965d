"""Chart atlas, smooth partition of unity, and the glued Riemannian metric.

Every mixture component contributes a chart whose image is a ball of radius
sqrt(largest eigenvalue) in its own k-dimensional frame. Bump functions on
those balls are normalized into a partition of unity, which blends per-chart
inner products into a metric that varies smoothly with the query point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook
from .kernels import smooth_step_down

DEFAULT_DELTA_RATIO = 0.1
METRIC_FLOOR = 1e-8


@dataclass(frozen=True)
class ChartAtlas:
    radii: np.ndarray     # (M,)
    frames: np.ndarray    # (M, k, n), orthonormal rows
    offsets: np.ndarray   # (M, k), frame applied to the component mean
    weights: np.ndarray   # (M,)
    deltas: np.ndarray    # (M,)

    @property
    def k(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.radii.size


@dataclass(frozen=True)
class MetricValue:
    form: np.ndarray
    defined: bool
    ref: int = -1


def build_atlas(cb: Codebook, k: int, delta_ratio: float = DEFAULT_DELTA_RATIO) -> ChartAtlas:
    n = cb.dim
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n={n}, got k={k}")
    if not 0 < delta_ratio < 1:
        raise ValueError("delta_ratio must lie in (0, 1)")
    radii = np.array([np.sqrt(g.eigvals[0]) for g in cb.models])
    frames = np.stack([g.eigvecs[:, :k].T for g in cb.models])
    offsets = np.einsum("mkn,mn->mk", frames, cb.means)
    return ChartAtlas(radii, frames, offsets, np.array(cb.weights), delta_ratio * radii)


def _bumps(atlas: ChartAtlas, dist: np.ndarray) -> np.ndarray:
    # dist: (..., M) distances to each chart's centre
    inner = atlas.radii - atlas.deltas
    theta = (dist - inner) / atlas.deltas
    return np.where(dist <= inner, 1.0, np.where(dist >= atlas.radii, 0.0, smooth_step_down(theta)))


def _normalize(atlas: ChartAtlas, psi: np.ndarray):
    num = atlas.weights * psi
    den = num.sum(axis=-1, keepdims=True)
    defined = den[..., 0] > 0
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, num / safe, 0.0), defined


def chart_activations(atlas: ChartAtlas, u) -> np.ndarray:
    """psi_m(u) for every chart, bump centred at the chart offset."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != atlas.k:
        raise ValueError(f"dimension mismatch: atlas k={atlas.k}, point has {u.shape[-1]}")
    dist = np.linalg.norm(u[..., None, :] - atlas.offsets, axis=-1)
    return _bumps(atlas, dist)


def partition_weights(atlas: ChartAtlas, u):
    """eta_m(u) = p_m psi_m(u) / sum_m' p_m' psi_m'(u).

    Returns ``(weights, defined)``. Where no bump is active the weights are all
    zero and ``defined`` is False. ``u`` may be a single k-vector or (Q, k).
    """
    w, defined = _normalize(atlas, chart_activations(atlas, u))
    return w, (bool(defined) if np.ndim(defined) == 0 else defined)


def metric_weights(atlas: ChartAtlas, y):
    """Blending weights at chart-local position y: chart m is probed at y + offset_m."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != atlas.k:
        raise ValueError(f"dimension mismatch: atlas k={atlas.k}, point has {y.shape[-1]}")
    r = np.linalg.norm(y, axis=-1)[..., None]
    w, defined = _normalize(atlas, _bumps(atlas, np.broadcast_to(r, r.shape[:-1] + (len(atlas),))))
    return w, (bool(defined) if np.ndim(defined) == 0 else defined)


def chart_forms(atlas: ChartAtlas, ref: int) -> np.ndarray:
    """(M, k, k) inner products of chart m for vectors given in chart ``ref``'s frame.

    A vector u of the reference chart is lifted to the ambient space through the
    reference frame and re-expressed in chart m's frame, R_m u with
    R_m = frame_m frame_ref^T; the form is R_m^T R_m, floored to stay definite.
    """
    R = np.einsum("mkn,jn->mkj", atlas.frames, atlas.frames[ref])
    G = np.einsum("mki,mkj->mij", R, R)
    G = 0.5 * (G + np.swapaxes(G, 1, 2))
    lo = np.linalg.eigvalsh(G)[:, 0]
    k = atlas.k
    G[lo < METRIC_FLOOR] += METRIC_FLOOR * np.eye(k)
    G[ref] = np.eye(k)
    return G


def metric_matrix(atlas: ChartAtlas, y, ref: int | None = None) -> MetricValue:
    """G(y) with g_y(u, u') = u^T G(y) u'.

    ``ref`` is the chart whose frame expresses y, u and u'; by default the
    chart with the largest blending weight at y.
    """
    w, defined = metric_weights(atlas, y)
    k = atlas.k
    if not defined:
        return MetricValue(np.zeros((k, k)), False, -1 if ref is None else ref)
    if ref is None:
        ref = int(np.argmax(w))
    G = np.einsum("m,mij->ij", w, chart_forms(atlas, ref))
    return MetricValue(0.5 * (G + G.T), True, ref)


def metric(atlas: ChartAtlas, y, u, u2, ref: int | None = None) -> float:
    u = np.asarray(u, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u.shape != (atlas.k,) or u2.shape != (atlas.k,):
        raise ValueError(f"tangent vectors must have length k={atlas.k}")
    mv = metric_matrix(atlas, y, ref)
    return float(u @ mv.form @ u2)


def metric_smoothness_probe(atlas: ChartAtlas, y, direction, h: float,
                            ref: int | None = None) -> float:
    """max |G(y + h d) - G(y)| / h with the reference chart held fixed."""
    if not h > 0:
        raise ValueError("h must be positive")
    y = np.asarray(y, dtype=float)
    d = np.asarray(direction, dtype=float)
    a = metric_matrix(atlas, y, ref)
    if not a.defined:
        raise ValueError("metric undefined at y")
    b = metric_matrix(atlas, y + h * d, a.ref)
    if not b.defined:
        raise ValueError("metric undefined at y + h*direction")
    return float(np.max(np.abs(b.form - a.form)) / h)
