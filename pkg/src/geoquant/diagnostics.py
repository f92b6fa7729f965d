"""Known-density diagnostics: Monte-Carlo divergences, resolvability, loss bounds.

Densities are passed as callables mapping an (N, n) array to log-densities and
samplers as callables ``sampler(count, seed) -> (count, n) array``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .codebook import Codebook
from .gaussmodel import log_density, sample
from .lloyd import FitConfig, fit

MIN_MC_SAMPLES = 100


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int | None = None


def _estimate(terms: np.ndarray, seed) -> MCEstimate:
    n = terms.size
    se = float(np.std(terms, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(float(np.mean(terms)), se, n, seed)


def gaussian_logpdf(g):
    return lambda X: log_density(g, np.atleast_2d(X))


def gaussian_sampler(g):
    return lambda count, seed: sample(g, count, seed)


def mixture_sampler(cb: Codebook):
    """Sampler for the mixture sum_m p_m g_m of a codebook."""
    def draw(count, seed):
        rng = np.random.default_rng(seed)
        labels = rng.choice(len(cb), size=count, p=cb.weights)
        z = rng.standard_normal((count, cb.dim))
        chol = np.stack([g.chol for g in cb.models])
        return cb.means[labels] + np.einsum("inj,ij->in", chol[labels], z)
    return draw


def mc_kl(logf_star, sampler_f_star, logg, n: int, seed: int) -> MCEstimate:
    """Estimate D(f* || g) as the sample mean of ln f*(X) - ln g(X), X ~ f*."""
    if n < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples")
    X = sampler_f_star(n, seed)
    terms = np.asarray(logf_star(X)) - np.asarray(logg(X))
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        raise FloatingPointError(f"non-finite log ratio at sample {bad[0]}: x = {X[bad[0]]}")
    return _estimate(terms, seed)


def mc_l1(logf, logg, sampler_f, sampler_g, n: int, seed: int) -> MCEstimate:
    """Estimate ||f - g||_1 by importance sampling from (f + g) / 2.

    Each weighted term |f - g| / ((f + g)/2) equals 2 |tanh((ln f - ln g)/2)|,
    so it lies in [0, 2].
    """
    if n < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples")
    if sampler_f is None or sampler_g is None:
        raise ValueError("degenerate proposal: both samplers are required")
    rng = np.random.default_rng(seed)
    n_f = int(rng.binomial(n, 0.5))
    s_f, s_g = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))
    parts = []
    if n_f:
        parts.append(np.atleast_2d(sampler_f(n_f, s_f)))
    if n - n_f:
        parts.append(np.atleast_2d(sampler_g(n - n_f, s_g)))
    X = np.concatenate(parts)
    lf = np.asarray(logf(X), dtype=float)
    lg = np.asarray(logg(X), dtype=float)
    if np.any(np.isneginf(lf) & np.isneginf(lg)):
        raise ValueError("degenerate proposal: sample outside both supports")
    with np.errstate(invalid="ignore"):
        diff = lf - lg
    diff = np.where(np.isnan(diff), 0.0, diff)
    terms = 2.0 * np.abs(np.tanh(0.5 * diff))
    return _estimate(terms, seed)


def ibar_estimate(cb: Codebook, assignments, logf_star, data) -> MCEstimate:
    """Plug-in estimate of the partition objective sum_m P(R_m)[D(f_m||g_m) + mu phi_m].

    Cell probabilities are cell frequencies, and within-cell divergences use
    f_m = f* 1{R_m} / P(R_m). The standard error comes from the per-sample terms.
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    a = np.asarray(assignments)
    N = X.shape[0]
    counts = np.bincount(a, minlength=len(cb))
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        warnings.warn(f"skipping empty cells {empty.tolist()}", stacklevel=2)
    p_hat = counts / N
    lf = np.asarray(logf_star(X), dtype=float)
    lg = np.empty(N)
    for m in np.flatnonzero(counts):
        sel = a == m
        lg[sel] = log_density(cb.models[m], X[sel])
    terms = lf - lg - np.log(p_hat[a])
    est = _estimate(terms, None)
    complexity = cb.mu * float(np.sum(p_hat * cb.cache.phi))
    return replace(est, value=est.value + complexity)


@dataclass(frozen=True)
class ResolvabilityReport:
    divergences: np.ndarray     # d_m, MC estimates of D(f* || g_m)
    std_errors: np.ndarray
    complexities: np.ndarray    # L_m = phi_m - ln p_m
    terms: np.ndarray           # d_m + mu L_m / N
    r_index: float
    argmin: int
    N: int
    mu: float


def resolvability(cb: Codebook, logf_star, sampler_f_star, N: int, mc_n: int,
                  seed: int) -> ResolvabilityReport:
    """Index of resolvability min_m [D(f*||g_m) + mu L_m / N]; all d_m share one sample."""
    X = sampler_f_star(mc_n, seed)
    lf = np.asarray(logf_star(X))
    d = np.empty(len(cb))
    se = np.empty(len(cb))
    for m, g in enumerate(cb.models):
        est = mc_kl(lambda _: lf, lambda *_: X, gaussian_logpdf(g), mc_n, seed)
        d[m], se[m] = est.value, est.std_error
    with np.errstate(divide="ignore"):
        L = cb.cache.phi - np.log(cb.weights)
    terms = d + cb.mu * L / N
    j = int(np.argmin(terms))
    return ResolvabilityReport(d, se, L, terms, float(terms[j]), j, N, cb.mu)


def theorem1_alpha(mu: float, h: float, M_fstar: float) -> float:
    return M_fstar / (2.0 * (mu - h))


def theorem1_bound(r_index: float, M_size: int, mu: float, h: float, M_fstar: float,
                   N: int, delta: float):
    """High-probability and expected-loss bounds on D(f* || g).

    Returns ``(prob_bound, exp_bound)`` where prob_bound holds with probability
    at least 1 - 2 delta. Requires mu > h + M_fstar / 2.
    """
    if not mu > h + M_fstar / 2.0:
        raise ValueError(
            f"hypothesis mu > h + M(f*)/2 violated: {mu} <= {h} + {M_fstar}/2 = {h + M_fstar / 2}"
        )
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if M_size < 1 or N < 1:
        raise ValueError("codebook size and N must be positive")
    alpha = theorem1_alpha(mu, h, M_fstar)
    lead = (1.0 + alpha) / (1.0 - alpha) * r_index
    prob_bound = lead + 2.0 * mu * math.log(M_size / delta) / ((1.0 - alpha) * N)
    exp_bound = lead + 4.0 * M_size * mu / ((1.0 - alpha) * N)
    return prob_bound, exp_bound


def moment_advisory(cb: Codebook, logf_star, sampler_f_star, n: int, seed: int) -> dict:
    """Per-component sample mean and variance of U_m = -ln(f*(X)/g_m(X)).

    Advisory only: these do not verify the moment condition behind the bounds.
    The ratio -var/mean gives a crude lower estimate of M(f*).
    """
    X = sampler_f_star(n, seed)
    lf = np.asarray(logf_star(X))
    U = np.stack([log_density(g, X) - lf for g in cb.models])
    mean = U.mean(axis=1)
    var = U.var(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mean < 0, -var / mean, np.inf)
    return {"mean": mean, "var": var, "M_estimate": float(np.max(ratio))}


@dataclass
class SweepRow:
    N: int
    m_init: int
    kl: list = field(default_factory=list)           # per seed D(f* || g^(N))
    kl_se: list = field(default_factory=list)
    sizes: list = field(default_factory=list)        # per seed |M^(N)|
    r_index: list = field(default_factory=list)
    max_L: list = field(default_factory=list)

    @property
    def median_kl(self) -> float:
        return float(np.median(self.kl))

    @property
    def m_init_ratio(self) -> float:
        return self.m_init / self.N

    @property
    def max_L_ratio(self) -> float:
        return float(np.median(self.max_L)) / self.N


def default_m_init(N: int, cap: int = 256) -> int:
    return min(math.ceil(math.sqrt(N)), cap, N)


def consistency_sweep(cfg: FitConfig, f_star, N_grid, seeds, mc_n: int = 20000,
                      mc_seed: int = 12345, m_init=default_m_init) -> list:
    """Fit on fresh samples of f* for each N and seed; one row per N, ordered by N.

    ``f_star`` needs ``log_density(X)`` and ``sample(count, seed)`` (an
    :class:`~geoquant.synth.EmbeddingSpec` works). The sample for (N, seed) is
    drawn with seed ``1000003 * N + seed``.
    """
    N_grid = list(N_grid)
    if any(b <= a for a, b in zip(N_grid, N_grid[1:])):
        raise ValueError("N_grid must be strictly increasing")
    T = f_star.sample(mc_n, mc_seed)
    lf = np.asarray(f_star.log_density(T))
    rows = []
    for N in N_grid:
        row = SweepRow(N, m_init(N))
        for s in seeds:
            X = f_star.sample(N, 1000003 * N + s)
            rep = fit(X, replace(cfg, m_init=row.m_init, seed=s))
            cb = rep.final_codebook
            terms = lf - cb.mixture_log_density(T)
            est = _estimate(terms, mc_seed)
            res = resolvability(cb, f_star.log_density, lambda *_: T, N, mc_n, mc_seed)
            row.kl.append(est.value)
            row.kl_se.append(est.std_error)
            row.sizes.append(len(cb))
            row.r_index.append(res.r_index)
            row.max_L.append(float(np.max(res.complexities)))
        rows.append(row)
    return rows
