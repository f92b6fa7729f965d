"""Empirical Lloyd descent for complexity-regularized Gaussian codebooks."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .codebook import Codebook, length_update, remove_empty
from .gaussmodel import (DEFAULT_ABS_FLOOR, DEFAULT_FLOOR_RATIO, GaussianModel, clip_cov,
                         covariance_floor, kl_gaussian, log_density, regularize_cov)
from .kernels import Gaussian, KernelSpec

log = logging.getLogger(__name__)

INIT_SCHEMES = ("farthest_point", "random_subset")


@dataclass(frozen=True)
class FitConfig:
    """Lloyd hyperparameters.

    ``m_init=None`` means min(32, N // 10) (at least 1) and ``kernel=None``
    a Gaussian kernel with sigma = diameter(data) / sqrt(m_init).
    """

    m_init: int | None = None
    mu: float = 1.0
    kernel: KernelSpec | None = None
    epsilon: float = 1e-4
    max_iter: int = 200
    seed: int = 0
    cov_floor_ratio: float = DEFAULT_FLOOR_RATIO
    init_scheme: str = "farthest_point"
    threads: int = 1

    def __post_init__(self):
        if self.m_init is not None and self.m_init < 1:
            raise ValueError("m_init must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"init_scheme must be one of {INIT_SCHEMES}")


@dataclass
class StepRecord:
    """Objective values around each Lloyd step of one iteration."""

    encode_before: float
    encode_after: float
    surrogate_before: np.ndarray
    surrogate_after: np.ndarray
    length_before: float
    length_after: float
    kraft_sum: float
    removed: int


@dataclass
class FitReport:
    final_codebook: Codebook
    assignments: np.ndarray
    counts: np.ndarray
    distortion_trace: list
    initial_distortion: float
    iterations: int
    removed_cells: int
    converged: bool
    config: FitConfig
    steps: list = field(default_factory=list, repr=False)


def data_diameter(data, chunk: int = 2048) -> float:
    """Largest pairwise Euclidean distance, computed in row blocks."""
    X = np.atleast_2d(np.asarray(data, dtype=float))
    sq = np.sum(X * X, axis=1)
    best = 0.0
    for start in range(0, X.shape[0], chunk):
        blk = X[start:start + chunk]
        d2 = sq[start:start + chunk, None] + sq[None, :] - 2.0 * blk @ X.T
        best = max(best, float(d2.max()))
    return math.sqrt(max(best, 0.0))


def resolve_config(data, cfg: FitConfig) -> FitConfig:
    """Fill in data-dependent defaults."""
    N = len(data)
    m_init = cfg.m_init if cfg.m_init is not None else max(1, min(32, N // 10))
    kernel = cfg.kernel
    if kernel is None:
        diam = data_diameter(data)
        kernel = Gaussian(sigma=diam / math.sqrt(m_init) if diam > 0 else 1.0)
    return replace(cfg, m_init=m_init, kernel=kernel)


def _as_data(data) -> np.ndarray:
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("data must be a nonempty (N, n) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite entries")
    return X


def farthest_point_seeds(X: np.ndarray, m: int) -> np.ndarray:
    centroid = X.mean(axis=0)
    first = int(np.argmin(np.sum((X - centroid) ** 2, axis=1)))
    chosen = [first]
    mind = np.sum((X - X[first]) ** 2, axis=1)
    for _ in range(1, m):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, np.sum((X - X[nxt]) ** 2, axis=1))
    return np.array(chosen)


def global_cov(X: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.cov(X, rowvar=False, bias=True))


def fit_cov_floor(data, floor_ratio: float = DEFAULT_FLOOR_RATIO) -> float:
    """Eigenvalue floor shared by every covariance of one fit.

    It equals the shift that :func:`initialize` adds to the global covariance,
    so initial models already satisfy it.
    """
    return covariance_floor(global_cov(_as_data(data)), floor_ratio)


def initialize(data, cfg: FitConfig) -> Codebook:
    X = _as_data(data)
    cfg = resolve_config(X, cfg)
    m = cfg.m_init
    if X.shape[0] < m:
        raise ValueError(f"need at least m_init={m} samples, got {X.shape[0]}")
    if cfg.init_scheme == "farthest_point":
        idx = farthest_point_seeds(X, m)
    else:
        idx = np.random.default_rng(cfg.seed).choice(X.shape[0], size=m, replace=False)
    cov = regularize_cov(global_cov(X), cfg.cov_floor_ratio)
    models = tuple(GaussianModel(X[i], cov) for i in idx)
    return Codebook(models, np.full(m, 1.0 / m), np.full(m, math.log(m)), cfg.kernel, cfg.mu)


def encode_step(cb: Codebook, data, threads: int = 1):
    """Minimum-rho0 encoder; ties go to the smallest index.

    Returns ``(assignments, counts)``. Rows are split across ``threads``
    workers; the result does not depend on the worker count.
    """
    X = _as_data(data)
    if threads <= 1 or X.shape[0] < 2 * threads:
        assignments = np.argmin(cb.rho0_matrix(X), axis=1)
    else:
        chunks = np.array_split(X, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: np.argmin(cb.rho0_matrix(c), axis=1), chunks))
        assignments = np.concatenate(parts)
    counts = np.bincount(assignments, minlength=len(cb))
    return assignments, counts


def average_distortion(cb: Codebook, data, assignments) -> float:
    X = _as_data(data)
    R = cb.rho0_matrix(X)
    return float(np.mean(R[np.arange(X.shape[0]), assignments]))


def frozen_surrogate(cb: Codebook, m: int, cell, g: GaussianModel) -> float:
    """Cell-conditional rho0 of candidate ``g`` with kernel weights and neighbours frozen at ``cb``."""
    cell = _as_data(cell)
    val = -float(np.mean(log_density(g, cell))) + cb.lengths[m]
    if cb.mu > 0:
        kap = cb.cache.kappa[m]
        for j, other in enumerate(cb.models):
            if j != m and kap[j] > 0:
                val += cb.mu * kap[j] * kl_gaussian(other, g)
    return val


def frozen_centroid(cb: Codebook, m: int, cell, cov_floor: float = DEFAULT_ABS_FLOOR):
    """Exact minimizer of the frozen surrogate for cell ``m`` over covariances >= cov_floor * I.

    The surrogate is the Gaussian negative log-likelihood of a mixture of the
    empirical cell measure (weight 1) and the old neighbours (weights
    mu * kappa), so the minimizer matches that mixture's first two moments,
    with eigenvalues below the floor raised to it.
    """
    cell = _as_data(cell)
    lam = cb.mu * cb.cache.kappa[m].copy() if len(cb) > 1 else np.zeros(1)
    lam[m] = 0.0
    total = 1.0 + lam.sum()
    means = cb.means
    new_mean = (cell.mean(axis=0) + lam @ means) / total
    diff = cell - new_mean
    scatter = diff.T @ diff / cell.shape[0]
    for j in np.flatnonzero(lam > 0):
        d = new_mean - means[j]
        scatter = scatter + lam[j] * (cb.models[j].cov + np.outer(d, d))
    scatter = 0.5 * (scatter + scatter.T) / total
    return GaussianModel(new_mean, clip_cov(scatter, cov_floor))


def centroid_step(cb: Codebook, data, assignments,
                  cov_floor: float = DEFAULT_ABS_FLOOR) -> Codebook:
    X = _as_data(data)
    assignments = np.asarray(assignments)
    models = []
    for m in range(len(cb)):
        cell = X[assignments == m]
        if cell.shape[0] == 0:
            raise ValueError(f"cell {m} is empty; remove empty cells before the centroid step")
        models.append(frozen_centroid(cb, m, cell, cov_floor))
    return cb.replace(models=tuple(models))


def _improvement_small(prev: float, cur: float, eps: float) -> bool:
    if prev <= 0:
        return abs(prev - cur) < eps
    return (prev - cur) / prev < eps


def fit(data, cfg: FitConfig = FitConfig(), record_steps: bool = False) -> FitReport:
    """Run the Lloyd loop: encode, prune, centroid, length update, test.

    With ``record_steps`` each iteration also stores the objective before and
    after every step (see :class:`StepRecord`).
    """
    X = _as_data(data)
    cfg = resolve_config(X, cfg)
    N = X.shape[0]
    cb = initialize(X, cfg)
    floor = fit_cov_floor(X, cfg.cov_floor_ratio)
    assignments, counts = encode_step(cb, X, cfg.threads)
    d_prev = average_distortion(cb, X, assignments)
    d0 = d_prev
    trace = []
    steps = []
    removed_total = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        before = average_distortion(cb, X, assignments) if record_steps else None
        assignments, counts = encode_step(cb, X, cfg.threads)
        after = average_distortion(cb, X, assignments) if record_steps else None

        keep = counts > 0
        removed = int(np.sum(~keep))
        if removed:
            remap = np.cumsum(keep) - 1
            cb = remove_empty(cb, counts)
            assignments = remap[assignments]
            counts = counts[keep]
            removed_total += removed

        new_cb = centroid_step(cb, X, assignments, floor)
        if record_steps:
            sur_b = np.empty(len(cb))
            sur_a = np.empty(len(cb))
            for m in range(len(cb)):
                cell = X[assignments == m]
                sur_b[m] = frozen_surrogate(cb, m, cell, cb.models[m])
                sur_a[m] = frozen_surrogate(cb, m, cell, new_cb.models[m])
        cb = new_cb

        if record_steps:
            len_before = average_distortion(cb, X, assignments)
        cb = length_update(cb.replace(weights=counts / N))
        d_cur = average_distortion(cb, X, assignments)
        trace.append(d_cur)
        if record_steps:
            steps.append(StepRecord(before, after, sur_b, sur_a, len_before, d_cur,
                                    cb.kraft_sum(), removed))
        log.debug("iter %d: |M|=%d D=%.10g", it, len(cb), d_cur)
        if _improvement_small(d_prev, d_cur, cfg.epsilon):
            converged = True
            break
        d_prev = d_cur

    return FitReport(
        final_codebook=cb,
        assignments=assignments,
        counts=counts,
        distortion_trace=trace,
        initial_distortion=d0,
        iterations=it,
        removed_cells=removed_total,
        converged=converged,
        config=cfg,
        steps=steps,
    )


def trace_violations(trace, slack: float = 1e-6) -> list:
    """Indices r where D[r+2] exceeds D[r] by more than ``slack`` relative."""
    bad = []
    for r in range(len(trace) - 2):
        ref = trace[r]
        if trace[r + 2] > ref + slack * abs(ref):
            bad.append(r)
    return bad
