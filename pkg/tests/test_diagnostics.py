import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from geoquant.codebook import Codebook
from geoquant.diagnostics import (consistency_sweep, gaussian_logpdf, gaussian_sampler, ibar_estimate,
                                  mc_kl, mc_l1, mixture_sampler, moment_advisory, resolvability,
                                  theorem1_alpha, theorem1_bound)
from geoquant.gaussmodel import GaussianModel, kl_gaussian, log_density
from geoquant.kernels import Gaussian
from geoquant.lloyd import FitConfig, encode_step, fit
from geoquant.synth import EmbeddingSpec, builtin_fixture

N01 = GaussianModel([0.0], [[1.0]])
N11 = GaussianModel([1.0], [[1.0]])


def uniform_logpdf(lo, hi):
    def f(X):
        X = np.asarray(X)[:, 0]
        return np.where((X >= lo) & (X <= hi), -math.log(hi - lo), -np.inf)
    return f


def uniform_sampler(lo, hi):
    return lambda count, seed: np.random.default_rng(seed).uniform(lo, hi, (count, 1))


class TestMCKL:
    def test_self(self):
        est = mc_kl(gaussian_logpdf(N01), gaussian_sampler(N01), gaussian_logpdf(N01), 1000, 1)
        assert est.value == 0.0 and est.std_error == 0.0

    def test_unit_shift(self):
        est = mc_kl(gaussian_logpdf(N01), gaussian_sampler(N01), gaussian_logpdf(N11), 100_000, 3)
        assert abs(est.value - 0.5) <= 3 * est.std_error
        assert est.n_samples == 100_000 and est.seed == 3

    def test_mixture_vs_component(self):
        spec = builtin_fixture("two-charts-2d")
        est = mc_kl(spec.log_density, spec.sample, gaussian_logpdf(spec.components[0]), 20_000, 5)
        assert est.value >= -3 * est.std_error

    def test_reproducible(self):
        a = mc_kl(gaussian_logpdf(N01), gaussian_sampler(N01), gaussian_logpdf(N11), 500, 9)
        b = mc_kl(gaussian_logpdf(N01), gaussian_sampler(N01), gaussian_logpdf(N11), 500, 9)
        assert a == b

    def test_errors(self):
        with pytest.raises(ValueError):
            mc_kl(gaussian_logpdf(N01), gaussian_sampler(N01), gaussian_logpdf(N11), 99, 0)
        with pytest.raises(FloatingPointError):
            mc_kl(gaussian_logpdf(N01), gaussian_sampler(N01), uniform_logpdf(-1, 1), 1000, 0)


class TestMCL1:
    def test_equal(self):
        est = mc_l1(gaussian_logpdf(N01), gaussian_logpdf(N01), gaussian_sampler(N01),
                    gaussian_sampler(N01), 1000, 0)
        assert est.value == 0.0

    def test_disjoint(self):
        est = mc_l1(uniform_logpdf(0, 1), uniform_logpdf(2, 3), uniform_sampler(0, 1),
                    uniform_sampler(2, 3), 1000, 0)
        assert abs(est.value - 2.0) <= max(3 * est.std_error, 1e-12)

    def test_pinsker(self):
        est = mc_l1(gaussian_logpdf(N01), gaussian_logpdf(N11), gaussian_sampler(N01),
                    gaussian_sampler(N11), 50_000, 2)
        exact = 2 * math.erf(0.5 / math.sqrt(2))
        assert abs(est.value - exact) <= 3 * est.std_error
        assert est.value <= math.sqrt(2 * kl_gaussian(N01, N11)) + 3 * est.std_error

    def test_degenerate(self):
        with pytest.raises(ValueError):
            mc_l1(gaussian_logpdf(N01), gaussian_logpdf(N11), gaussian_sampler(N01), None, 1000, 0)
        # a proposal draw outside both supports
        with pytest.raises(ValueError):
            mc_l1(uniform_logpdf(0, 1), uniform_logpdf(2, 3), uniform_sampler(5, 6),
                  uniform_sampler(2, 3), 1000, 0)


class TestIbar:
    def test_single_cell_truth(self):
        g = GaussianModel([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]])
        cb = Codebook((g,), [1.0], [0.0], Gaussian(1.0), 1.0)
        X = gaussian_sampler(g)(5000, 0)
        est = ibar_estimate(cb, np.zeros(5000, dtype=int), gaussian_logpdf(g), X)
        assert est.value == pytest.approx(0.0, abs=1e-12)

    def test_mu_zero_identity(self):
        spec = builtin_fixture("two-charts-2d")
        X = spec.sample(4000, 1)
        rep = fit(X, FitConfig(m_init=4, mu=0.0, seed=1))
        cb = rep.final_codebook
        a = rep.assignments
        est = ibar_estimate(cb, a, spec.log_density, X)
        p_hat = np.bincount(a, minlength=len(cb)) / len(X)
        lg = np.array([log_density(cb.models[m], x) for x, m in zip(X, a)])
        lf = spec.log_density(X)
        assert est.value == pytest.approx(np.mean(lf - lg - np.log(p_hat[a])), rel=1e-12)
        # equals mean rho minus the mean codelength plus the entropy of the cell frequencies,
        # for any lengths stored in the codebook
        rho = lf - lg + cb.lengths[a]
        entropy = -np.sum(p_hat * np.log(p_hat))
        assert est.value == pytest.approx(rho.mean() - np.sum(p_hat * cb.lengths) + entropy, abs=1e-9)

    def test_nonnegative(self):
        spec = builtin_fixture("clusters-5d-k2", seed=2)
        X = spec.sample(3000, 4)
        rep = fit(X, FitConfig(m_init=6, mu=0.5, seed=4))
        est = ibar_estimate(rep.final_codebook, rep.assignments, spec.log_density, X)
        assert est.value >= -3 * est.std_error

    def test_empty_cell_warns(self):
        cb = Codebook((N01, N11), [0.5, 0.5], [math.log(2)] * 2, Gaussian(1.0), 0.0)
        X = gaussian_sampler(N01)(200, 0)
        with pytest.warns(UserWarning):
            ibar_estimate(cb, np.zeros(200, dtype=int), gaussian_logpdf(N01), X)


class TestResolvability:
    def test_truth_in_codebook(self):
        f = GaussianModel([0.0, 0.0], [[1.0, 0.3], [0.3, 0.5]])
        other = GaussianModel([3.0, 0.0], np.eye(2))
        cb = Codebook((other, f), [0.3, 0.7], [-math.log(0.3), -math.log(0.7)], Gaussian(1.0), 2.0)
        rep = resolvability(cb, gaussian_logpdf(f), gaussian_sampler(f), 500, 2000, 0)
        bound = cb.mu * (cb.cache.phi[1] - math.log(0.7)) / 500
        assert rep.divergences[1] == 0.0
        assert rep.r_index <= bound + 3 * rep.std_errors[1]
        assert np.all(rep.complexities >= 0)

    def test_monotone_in_N(self):
        cb = Codebook((N01, N11), [0.4, 0.6], [-math.log(0.4), -math.log(0.6)], Gaussian(1.0), 1.0)
        f = GaussianModel([0.3], [[1.5]])
        a = resolvability(cb, gaussian_logpdf(f), gaussian_sampler(f), 100, 1000, 7)
        b = resolvability(cb, gaussian_logpdf(f), gaussian_sampler(f), 1000, 1000, 7)
        assert np.all(b.terms <= a.terms)

    def test_argmin_brute_force(self):
        cb = Codebook((N01, N11), [0.2, 0.8], [-math.log(0.2), -math.log(0.8)], Gaussian(1.0), 3.0)
        f = GaussianModel([0.45], [[1.0]])
        rep = resolvability(cb, gaussian_logpdf(f), gaussian_sampler(f), 50, 20_000, 1)
        brute = [kl_gaussian(f, g) + 3.0 * (cb.cache.phi[m] - math.log(cb.weights[m])) / 50
                 for m, g in enumerate(cb.models)]
        assert rep.argmin == int(np.argmin(brute))
        assert rep.r_index == min(rep.terms)
        assert rep.divergences == pytest.approx([kl_gaussian(f, g) for g in cb.models], abs=0.01)


class TestTheoremBound:
    def test_alpha_zero(self):
        prob, exp = theorem1_bound(0.1, 4, 2.0, 0.5, 0.0, 1000, 0.05)
        assert prob == pytest.approx(0.1 + 4.0 * math.log(80) / 1000, rel=1e-14)
        assert exp == pytest.approx(0.1 + 32.0 / 1000, rel=1e-14)

    def test_fixture_values(self):
        # alpha = 1 / (2 * (2 - 0.5)) = 1/3, so (1+a)/(1-a) = 2 and 1 - a = 2/3
        assert theorem1_alpha(2.0, 0.5, 1.0) == pytest.approx(1 / 3, rel=1e-15)
        prob, exp = theorem1_bound(0.1, 4, 2.0, 0.5, 1.0, 1000, 0.05)
        assert prob == pytest.approx(0.2 + 4.0 * math.log(80) / (2 / 3 * 1000), abs=1e-12)
        assert prob == pytest.approx(0.226292, abs=1e-6)
        assert exp == pytest.approx(0.2 + 32.0 / (2 / 3 * 1000), abs=1e-12)

    def test_large_N_limit(self):
        prob, exp = theorem1_bound(0.1, 4, 2.0, 0.5, 1.0, 10**12, 0.05)
        assert prob == pytest.approx(0.2, abs=1e-9) and exp == pytest.approx(0.2, abs=1e-9)

    def test_hypothesis_violated(self):
        with pytest.raises(ValueError, match="mu > h"):
            theorem1_bound(0.1, 4, 1.0, 0.5, 1.0, 1000, 0.05)
        with pytest.raises(ValueError):
            theorem1_bound(0.1, 4, 2.0, 0.5, 1.0, 1000, 1.5)

    @settings(max_examples=300, deadline=None)
    @given(r=st.floats(0, 5), M=st.integers(1, 500), mu=st.floats(0.01, 50), h=st.floats(0, 10),
           Mf=st.floats(0, 10), N=st.integers(1, 10**6), delta=st.floats(1e-6, 0.999))
    def test_properties(self, r, M, mu, h, Mf, N, delta):
        assume(mu > h + Mf / 2 + 1e-9)
        a = theorem1_alpha(mu, h, Mf)
        assert 0 <= a < 1
        p1, e1 = theorem1_bound(r, M, mu, h, Mf, N, delta)
        p2, e2 = theorem1_bound(r, M, mu, h, Mf, N + 1, delta)
        assert e2 < e1
        if math.log(M / delta) > 0:
            assert p2 < p1


class TestConvexity:
    @pytest.mark.parametrize("name", ["two-charts-2d", "clusters-5d-k2"])
    def test_mixture_beats_worst_component(self, name):
        spec = builtin_fixture(name, seed=1)
        X = spec.sample(3000, 2)
        cb = fit(X, FitConfig(m_init=5, mu=0.5, seed=2)).final_codebook
        mix = mc_kl(spec.log_density, spec.sample, cb.mixture_log_density, 5000, 11)
        comps = [mc_kl(spec.log_density, spec.sample, gaussian_logpdf(g), 5000, 11) for g in cb.models]
        worst = max(comps, key=lambda e: e.value)
        assert mix.value <= worst.value + 3 * math.hypot(mix.std_error, worst.std_error)


class TestMixtureSampler:
    def test_moments(self):
        cb = Codebook((N01, N11), [0.25, 0.75], [-math.log(0.25), -math.log(0.75)], Gaussian(1.0), 0.0)
        X = mixture_sampler(cb)(100_000, 0)[:, 0]
        assert abs(X.mean() - 0.75) <= 3 * X.std() / math.sqrt(X.size)


class TestAdvisory:
    def test_shapes(self):
        cb = Codebook((N01, N11), [0.5, 0.5], [math.log(2)] * 2, Gaussian(1.0), 1.0)
        out = moment_advisory(cb, gaussian_logpdf(N01), gaussian_sampler(N01), 5000, 0)
        assert out["mean"].shape == (2,)
        assert out["mean"][0] == 0.0
        assert out["mean"][1] == pytest.approx(-0.5, abs=0.05)


class TestSweep:
    def test_columns(self):
        f = EmbeddingSpec([1.0], [[0.0, 0.0]], [[[0.0], [0.0]]], [[[1.0, 0.3], [0.3, 0.5]]])
        rows = consistency_sweep(FitConfig(mu=1.0), f, [100, 400], seeds=[0, 1], mc_n=2000)
        assert [r.N for r in rows] == [100, 400]
        assert [r.m_init for r in rows] == [10, 20]
        assert rows[1].m_init_ratio < rows[0].m_init_ratio
        for r in rows:
            assert len(r.kl) == 2 and all(s <= r.m_init for s in r.sizes)
            assert all(v >= -3 * se for v, se in zip(r.kl, r.kl_se))

    def test_grid_order(self):
        f = EmbeddingSpec([1.0], [[0.0, 0.0]], [[[0.0], [0.0]]], [np.eye(2)])
        with pytest.raises(ValueError):
            consistency_sweep(FitConfig(), f, [400, 100], seeds=[0])


@pytest.mark.slow
def test_bound_coverage_frequency():
    """Empirical frequency of the high-probability bound over independent fits.

    Uses f* inside the model class with M(f*) = 0 assumed, so alpha = 0.
    """
    f = GaussianModel([0.0, 0.0], [[1.0, 0.3], [0.3, 0.5]])
    spec = EmbeddingSpec([1.0], [f.mean], [[[0.0], [0.0]]], [f.cov])
    T = spec.sample(20_000, 99)
    delta, N, mu = 0.05, 500, 1.0
    hits = 0
    for s in range(50):
        X = spec.sample(N, 10_000 + s)
        cb = fit(X, FitConfig(m_init=8, mu=mu, seed=s)).final_codebook
        kl = float(np.mean(spec.log_density(T) - cb.mixture_log_density(T)))
        res = resolvability(cb, spec.log_density, lambda *_: T, N, 20_000, 0)
        prob, _ = theorem1_bound(res.r_index, len(cb), mu, 0.0, 0.0, N, delta)
        hits += kl <= prob
    assert hits / 50 >= 1 - 2 * delta
