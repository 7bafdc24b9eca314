"""Density models and inverse-CDF sampling."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from circneedlets.sampling import (
    circular_mean,
    circular_mean_stderr,
    density_eval,
    ks_statistic,
    make_model,
    sample,
)

ALL_MODELS = [
    make_model("uniform"),
    make_model("raised_cosine", center=0.0),
    make_model("raised_cosine", center=1.2, amplitude=0.6),
    make_model("gaussian_bump"),
    make_model("gaussian_bump", width=0.5),
    make_model("gaussian_bump", exponent_sign=1),
    make_model("von_mises", concentration=5.0),
]


class TestDensityEval:
    def test_uniform_is_one(self):
        m = make_model("uniform")
        th = np.linspace(0, 2 * math.pi, 17)
        np.testing.assert_allclose(density_eval(m, th), 1.0)

    def test_raised_cosine(self):
        m = make_model("raised_cosine", center=0.0)
        th = np.linspace(0, 2 * math.pi, 1001)
        vals = density_eval(m, th)
        np.testing.assert_allclose(vals, 1.0 + np.cos(th), atol=1e-14)
        assert vals.min() >= 0.0

    def test_gaussian_bump_normalized(self):
        m = make_model("gaussian_bump")
        # normalization from an independent quadrature of the kernel
        z, _ = quad(lambda t: math.exp(-((t - math.pi) ** 2) / 2.0), 0.0, 2 * math.pi)
        z /= 2 * math.pi
        assert m.pdf(math.pi) == pytest.approx(1.0 / z, rel=1e-10)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: f"{m.kind}-{m.exponent_sign}")
    def test_integrates_to_one(self, model):
        val, _ = quad(model.pdf, 0.0, 2 * math.pi, points=[model.center, math.pi], limit=300)
        assert val / (2 * math.pi) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: f"{m.kind}-{m.exponent_sign}")
    def test_nonnegative_and_periodic(self, model):
        th = np.linspace(-2 * math.pi, 4 * math.pi, 4001)
        vals = model.pdf(th)
        assert np.all(vals >= 0.0)
        np.testing.assert_allclose(model.pdf(th), model.pdf(th + 2 * math.pi), atol=1e-12)

    def test_literal_bump_sign_flip(self):
        # the +1 variant is largest opposite its center, smallest at it
        m = make_model("gaussian_bump", exponent_sign=1)
        assert m.pdf(0.0) > m.pdf(math.pi)
        assert m.sup == pytest.approx(m.pdf(0.0), rel=1e-12)

    def test_sup_values(self):
        assert make_model("uniform").sup == 1.0
        assert make_model("raised_cosine").sup == 2.0
        m = make_model("gaussian_bump")
        assert m.sup == pytest.approx(m.pdf(math.pi), rel=1e-12)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            make_model("cauchy")


class TestCdfTable:
    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: f"{m.kind}-{m.exponent_sign}")
    def test_cdf_monotone_and_normalized(self, model):
        grid, cum = model._cdf_table
        assert cum[0] == 0.0
        assert cum[-1] == 1.0
        assert np.all(np.diff(cum) >= 0.0)


class TestSampling:
    def test_range_and_reproducibility(self):
        m = make_model("gaussian_bump")
        s1 = sample(m, 1, seed=5)
        s2 = sample(m, 1, seed=5)
        assert s1.n == 1
        assert 0.0 <= s1.angles[0] < 2 * math.pi
        assert s1.angles[0] == s2.angles[0]
        s3 = sample(m, 1000, seed=5)
        s4 = sample(m, 1000, seed=5)
        np.testing.assert_array_equal(s3.angles, s4.angles)

    def test_uniform_ks(self):
        m = make_model("uniform")
        n = 20000
        s = sample(m, n, seed=31)
        assert ks_statistic(s, m) < 1.63 / math.sqrt(n)

    def test_bump_ks(self):
        m = make_model("gaussian_bump")
        n = 20000
        s = sample(m, n, seed=31)
        assert ks_statistic(s, m) < 1.63 / math.sqrt(n)

    def test_bump_mean_direction(self):
        m = make_model("gaussian_bump")
        s = sample(m, 40000, seed=99)
        mu = circular_mean(s.angles)
        se = circular_mean_stderr(s.angles)
        assert abs(mu - math.pi) < 3.0 * se

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample(make_model("uniform"), 0, seed=1)
