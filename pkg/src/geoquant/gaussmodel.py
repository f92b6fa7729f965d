"""Multivariate Gaussian models and the dense linear algebra built on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)

DEFAULT_FLOOR_RATIO = 1e-6
DEFAULT_ABS_FLOOR = 1e-12

_SYMMETRY_RTOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a covariance has a non-positive eigenvalue."""

    def __init__(self, smallest_eigval: float):
        super().__init__(
            f"covariance is not positive definite (smallest eigenvalue {smallest_eigval:.6g})"
        )
        self.smallest_eigval = smallest_eigval


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # first nonzero component of every column made positive
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    return vecs


def _as_symmetric(cov) -> np.ndarray:
    cov = np.array(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov.reshape(1, 1)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    scale = max(np.max(np.abs(cov)), np.finfo(float).tiny)
    if np.max(np.abs(cov - cov.T)) > _SYMMETRY_RTOL * scale:
        raise ValueError("covariance is not symmetric")
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Gaussian N(mean, cov) with cached Cholesky factor and spectrum.

    Eigenvalues are sorted in decreasing order and eigenvectors are the
    columns of ``eigvecs``, with the first nonzero entry of each made positive.
    Instances are immutable; build a new one whenever the moments change.
    """

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)
    log_det_cov: float = field(init=False, repr=False)
    eigvals: np.ndarray = field(init=False, repr=False)
    eigvecs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = _as_symmetric(self.cov)
        if cov.shape[0] != mean.size:
            raise ValueError(
                f"mean has length {mean.size} but covariance is {cov.shape[0]}x{cov.shape[1]}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("non-finite mean or covariance")
        vals, vecs = np.linalg.eigh(cov)
        if vals[0] <= 0:
            raise NotPositiveDefiniteError(float(vals[0]))
        order = np.argsort(vals)[::-1]
        vals = vals[order]
        vecs = _fix_signs(vecs[:, order])
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(float(vals[-1])) from None
        for arr in (mean, cov, chol, vals, vecs):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)
        object.__setattr__(self, "log_det_cov", float(2.0 * np.sum(np.log(np.diag(chol)))))
        object.__setattr__(self, "eigvals", vals)
        object.__setattr__(self, "eigvecs", vecs)

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_density(self, x) -> np.ndarray | float:
        return log_density(self, x)

    def precision(self) -> np.ndarray:
        inv_chol = np.linalg.inv(self.chol)
        return inv_chol.T @ inv_chol


def log_density(g: GaussianModel, x):
    """ln N(x; mean, cov), including the -(n/2) ln(2 pi) constant.

    ``x`` may be a single vector of length n or an (N, n) array; the result is
    a float or an array of length N accordingly.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[-1] != g.dim:
        raise ValueError(f"dimension mismatch: model has n={g.dim}, input has {X.shape[-1]}")
    diff = X - g.mean
    # solve L z = diff^T; quadratic form is |z|^2
    z = np.linalg.solve(g.chol, diff.T) if g.dim > 1 else diff.T / g.chol[0, 0]
    maha = np.sum(z * z, axis=0)
    out = -0.5 * (g.dim * LOG_2PI + g.log_det_cov + maha)
    return float(out[0]) if single else out


def kl_gaussian(g_from: GaussianModel, g_to: GaussianModel) -> float:
    """Relative entropy D(g_from || g_to) between two Gaussians, in nats."""
    if g_from.dim != g_to.dim:
        raise ValueError("dimension mismatch between Gaussians")
    n = g_to.dim
    inv_chol = np.linalg.inv(g_to.chol)
    prec = inv_chol.T @ inv_chol
    d = g_to.mean - g_from.mean
    val = 0.5 * (
        g_to.log_det_cov
        - g_from.log_det_cov
        + np.trace(prec @ g_from.cov)
        + d @ prec @ d
        - n
    )
    # rounding can leave a -1e-16 residue for identical models
    return max(float(val), 0.0)


def spectral_refresh(g: GaussianModel) -> GaussianModel:
    """Recompute every cached factor from ``g.cov``."""
    return GaussianModel(np.array(g.mean), np.array(g.cov))


def covariance_floor(cov, floor_ratio: float = DEFAULT_FLOOR_RATIO,
                     abs_floor: float = DEFAULT_ABS_FLOOR) -> float:
    """eps = max(floor_ratio * tr(cov)/n, abs_floor)."""
    if floor_ratio <= 0:
        raise ValueError("floor_ratio must be positive")
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    return max(floor_ratio * float(np.trace(cov)) / cov.shape[0], abs_floor)


def regularize_cov(cov, floor_ratio: float = DEFAULT_FLOOR_RATIO,
                   abs_floor: float = DEFAULT_ABS_FLOOR) -> np.ndarray:
    """Return ``cov + eps * I`` with eps from :func:`covariance_floor`."""
    cov = _as_symmetric(cov)
    eps = covariance_floor(cov, floor_ratio, abs_floor)
    return cov + eps * np.eye(cov.shape[0])


def clip_cov(cov, floor: float) -> np.ndarray:
    """Raise every eigenvalue of ``cov`` below ``floor`` to ``floor``.

    This minimizes ln det K + tr(K^-1 cov) over K >= floor * I. A matrix whose
    spectrum already clears the floor is returned unchanged.
    """
    if not floor > 0:
        raise ValueError("floor must be positive")
    cov = _as_symmetric(cov)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= floor:
        return cov
    out = (vecs * np.maximum(vals, floor)) @ vecs.T
    return 0.5 * (out + out.T)


def sample(g: GaussianModel, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` samples as an (count, n) array; deterministic in ``seed``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, g.dim))
    return g.mean + z @ g.chol.T
