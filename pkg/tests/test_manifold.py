import math

import numpy as np
import pytest

from geoquant.codebook import Codebook
from geoquant.gaussmodel import GaussianModel
from geoquant.kernels import BumpProfile, Gaussian, bump_eval
from geoquant.manifold import (build_atlas, chart_activations, metric, metric_matrix,
                               metric_smoothness_probe, metric_weights, partition_weights)

from conftest import random_spd


def rot(t):
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


def two_chart_cb(angle=0.4, p=(0.6, 0.4)):
    KA = np.diag([4.0, 1.0])
    R = rot(angle)
    KB = R @ np.diag([2.25, 0.5]) @ R.T
    return Codebook((GaussianModel([0.0, 0.0], KA), GaussianModel([1.0, 0.5], KB)),
                    list(p), [-math.log(q) for q in p], Gaussian(1.0), 1.0)


class TestAtlas:
    def test_diagonal(self):
        cb = Codebook((GaussianModel([3.0, 1.0], np.diag([4.0, 1.0])),), [1.0], [0.0], Gaussian(1.0), 1.0)
        atlas = build_atlas(cb, 1, 0.1)
        assert atlas.radii[0] == pytest.approx(2.0)
        assert np.allclose(atlas.frames[0], [[1.0, 0.0]])
        assert atlas.offsets[0] == pytest.approx([3.0])
        assert atlas.deltas[0] == pytest.approx(0.2)

    def test_radii_match_spectrum(self, rng):
        models = tuple(GaussianModel(rng.standard_normal(4), random_spd(rng, 4)) for _ in range(10))
        w = np.full(10, 0.1)
        cb = Codebook(models, w, -np.log(w), Gaussian(1.0), 0.0)
        atlas = build_atlas(cb, 2)
        assert atlas.radii == pytest.approx([math.sqrt(np.linalg.eigvalsh(g.cov)[-1]) for g in models],
                                            rel=1e-10)
        for F in atlas.frames:
            assert np.allclose(F @ F.T, np.eye(2), atol=1e-12)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            build_atlas(two_chart_cb(), 2)
        with pytest.raises(ValueError):
            build_atlas(two_chart_cb(), 1, 1.5)


class TestPartition:
    def test_single_active(self):
        atlas = build_atlas(two_chart_cb(), 1)
        # chart 0 sits at 0 with inner radius 1.8; chart 1 sits near 1.12 with radius 1.5
        u = np.array([-1.0])
        assert chart_activations(atlas, u).tolist() == [1.0, 0.0]
        w, ok = partition_weights(atlas, u)
        assert ok and w.tolist() == [1.0, 0.0]
        w, ok = partition_weights(atlas, np.array([10.0]))
        assert not ok and np.all(w == 0)

    def test_sums_to_one(self, rng):
        atlas = build_atlas(two_chart_cb(), 1)
        U = rng.uniform(-3, 3, (500, 1))
        w, ok = partition_weights(atlas, U)
        assert np.all(np.abs(w[ok].sum(axis=1) - 1) <= 1e-12)
        assert np.all((w >= 0) & (w <= 1))

    def test_undefined_far(self):
        atlas = build_atlas(two_chart_cb(), 1)
        _, ok = partition_weights(atlas, np.array([100.0]))
        assert ok is False

    def test_bump_boundaries(self):
        atlas = build_atlas(two_chart_cb(), 1)
        for m in range(2):
            r, d, o = atlas.radii[m], atlas.deltas[m], atlas.offsets[m]
            assert chart_activations(atlas, o + 0.999 * (r - d))[m] == 1.0
            assert chart_activations(atlas, o + r)[m] == 0.0
            assert chart_activations(atlas, o - 1.001 * r)[m] == 0.0


class TestMetric:
    def test_single_chart_center(self):
        cb = Codebook((GaussianModel(np.zeros(3), np.diag([4.0, 2.0, 1.0])),), [1.0], [0.0],
                      Gaussian(1.0), 1.0)
        atlas = build_atlas(cb, 2)
        mv = metric_matrix(atlas, np.zeros(2))
        assert mv.defined
        assert np.array_equal(mv.form, np.eye(2))
        u, v = np.array([1.0, 2.0]), np.array([-0.5, 3.0])
        assert metric(atlas, np.zeros(2), u, v) == pytest.approx(u @ v)

    def test_symmetric(self, rng):
        atlas = build_atlas(two_chart_cb(), 1)
        for _ in range(20):
            y, u, v = rng.uniform(-1.8, 1.8, (3, 1))
            assert metric(atlas, y, u, v) == pytest.approx(metric(atlas, y, v, u), abs=1e-15)

    def test_two_chart_hand_fixture(self):
        angle = 0.4
        cb = two_chart_cb(angle)
        atlas = build_atlas(cb, 1, 0.1)
        # radii 2 and 1.5, inner radii 1.8 and 1.35; at |y| = 1.4 chart A is fully on
        y = np.array([1.4])
        sB = float(bump_eval(BumpProfile(1.35, 1.5), 1.4))
        wA = 0.6 / (0.6 + 0.4 * sB)
        wB = 0.4 * sB / (0.6 + 0.4 * sB)
        expected = wA * 1.0 + wB * math.cos(angle) ** 2
        mv = metric_matrix(atlas, y, ref=0)
        assert 0 < sB < 1
        assert mv.form[0, 0] == pytest.approx(expected, rel=1e-12)
        w, _ = metric_weights(atlas, y)
        assert w == pytest.approx([wA, wB])

    def test_undefined(self):
        atlas = build_atlas(two_chart_cb(), 1)
        mv = metric_matrix(atlas, np.array([5.0]))
        assert not mv.defined and np.all(mv.form == 0)

    def test_convex_combination(self, rng):
        from geoquant.manifold import chart_forms
        cb = Codebook(tuple(GaussianModel(rng.standard_normal(3), random_spd(rng, 3)) for _ in range(4)),
                      [0.25] * 4, [math.log(4)] * 4, Gaussian(1.0), 1.0)
        atlas = build_atlas(cb, 2)
        for _ in range(100):
            y = rng.uniform(-1.5, 1.5, 2)
            mv = metric_matrix(atlas, y, ref=1)
            if not mv.defined:
                continue
            w, _ = metric_weights(atlas, y)
            forms = chart_forms(atlas, 1)[w > 0]
            lo = min(np.linalg.eigvalsh(G)[0] for G in forms)
            hi = max(np.linalg.eigvalsh(G)[-1] for G in forms)
            ev = np.linalg.eigvalsh(mv.form)
            assert lo - 1e-12 <= ev[0] and ev[-1] <= hi + 1e-12


class TestProbe:
    def test_constant_region(self):
        atlas = build_atlas(two_chart_cb(), 1)
        # both charts fully on for |y| < 1.35, so G is constant there
        assert metric_smoothness_probe(atlas, np.array([0.2]), np.array([1.0]), 1e-3, ref=0) == 0.0

    def test_bounded_across_shell(self):
        atlas = build_atlas(two_chart_cb(), 1)
        delta = atlas.deltas[1]
        vals = [metric_smoothness_probe(atlas, np.array([y]), np.array([1.0]), 1e-4, ref=0)
                for y in np.linspace(1.35, 1.5, 31)]
        # the step's slope is at most 2 per unit theta and |G_B - G_A| < 1
        assert max(vals) > 0
        assert max(vals) <= 2.0 / delta

    def test_difference_quotient_converges(self):
        atlas = build_atlas(two_chart_cb(), 1)
        y, d = np.array([1.42]), np.array([1.0])
        a = metric_smoothness_probe(atlas, y, d, 1e-4, ref=0)
        b = metric_smoothness_probe(atlas, y, d, 5e-5, ref=0)
        assert abs(a - b) < 0.1 * abs(a)

    def test_errors(self):
        atlas = build_atlas(two_chart_cb(), 1)
        with pytest.raises(ValueError):
            metric_smoothness_probe(atlas, np.array([5.0]), np.array([1.0]), 1e-3)
        with pytest.raises(ValueError):
            metric_smoothness_probe(atlas, np.array([0.0]), np.array([1.0]), 0.0)
