"""Frame layer: partitions, atoms, analysis/synthesis, tightness, bias."""

import math

import numpy as np
import pytest

from circneedlets.fourier import (
    from_callable,
    l2_distance,
    l2_norm,
    spectrum_to_grid,
    uniform_grid,
)
from circneedlets.frame import (
    AtomIndex,
    FrameParams,
    InequalityViolation,
    analyze,
    atom_l1_norm,
    atom_l2_norm_sq,
    besov_level_norms,
    besov_smoothness,
    bias_report,
    build_partition,
    calibrate_bias_constants,
    calibrate_envelope_constant,
    coefficients_from_csv,
    coefficients_to_csv,
    localization_envelope,
    needlet_eval,
    partition_from_csv,
    partition_to_csv,
    summation,
    synthesis_spectrum,
    tightness_ratio,
)
from circneedlets.sampling import make_model
from circneedlets.special import exact_cutoff, lambda_Bs, weight


def default_params(B=1.4, eta=1e-3, s=3):
    return FrameParams(s=s, B=B, eta=eta)


class TestFrameParams:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            FrameParams(s=0, B=1.4, eta=1e-3)
        with pytest.raises(ValueError):
            FrameParams(s=3, B=0.9, eta=1e-3)
        with pytest.raises(ValueError):
            FrameParams(s=3, B=1.4, eta=1.5)
        with pytest.raises(ValueError):
            # J0 must sit strictly below -log_B sqrt(s) ~ -1.63
            FrameParams(s=3, B=1.4, eta=1e-3, J0=-1)

    def test_auto_coarse_level(self):
        p = FrameParams(s=3, B=1.4, eta=1e-3)
        assert p.J0 < -0.5 * math.log(3) / math.log(1.4)


class TestPartition:
    def test_counts_match_ceiling_rule(self):
        p = FrameParams(s=1, B=2.0, eta=0.5, J0=-3)
        part = build_partition(p, 5)
        assert part.count(3) == 16
        assert part.arc_length(3) == pytest.approx(1.0 / 16.0)

    def test_large_level_count(self):
        p = default_params()
        part = build_partition(p, 10)
        assert part.count(10) == 28926  # ceil(1000 * 1.4^10)

    def test_arcs_sum_to_one(self):
        p = default_params()
        part = build_partition(p, 8)
        for j in part.levels:
            assert abs(math.fsum(part.lambdas(j)) - 1.0) < 1e-14

    def test_lambda_power_sums(self):
        # sum_q lambda^p <= eta^{p-1} B^{j(1-p)} for p > 1
        p = default_params()
        part = build_partition(p, 10)
        for j in part.levels:
            Q = part.count(j)
            for pw in (1.5, 2.0, 3.0):
                lhs = Q * (1.0 / Q) ** pw
                rhs = p.eta ** (pw - 1.0) * p.B ** (j * (1.0 - pw))
                assert lhs <= rhs * (1.0 + 1e-12)

    def test_midpoints(self):
        p = FrameParams(s=1, B=2.0, eta=0.5, J0=-3)
        part = build_partition(p, 3)
        centers = part.centers(3)
        assert centers[0] == pytest.approx(2 * math.pi * 0.5 / 16)
        assert part.center(3, 1) == pytest.approx(centers[0])
        with pytest.raises(ValueError):
            part.center(3, 17)

    def test_csv_roundtrip(self, tmp_path):
        p = default_params()
        part = build_partition(p, 3)
        path = tmp_path / "partition.csv"
        partition_to_csv(part, path)
        back = partition_from_csv(path)
        assert back.levels == part.levels
        assert back.counts == part.counts
        assert back.params == part.params


class TestNeedletEval:
    def test_center_value_positive_real(self):
        p = default_params()
        part = build_partition(p, 6)
        idx = AtomIndex(j=5, q=7)
        val = needlet_eval(p, part, idx, part.center(5, 7))
        ks = np.arange(1, exact_cutoff(3, 1.4, 5) + 1)
        expected = math.sqrt(part.arc_length(5)) * 2.0 * np.sum(weight(3, (ks / 1.4**5) ** 2))
        assert val == pytest.approx(expected, rel=1e-12)
        assert val > 0.0

    def test_zero_cutoff_vanishes(self):
        p = default_params()
        part = build_partition(p, 3)
        th = uniform_grid(64)
        vals = needlet_eval(p, part, AtomIndex(j=2, q=1, K=0), th)
        np.testing.assert_allclose(vals, 0.0)

    def test_periodicity(self):
        p = default_params()
        part = build_partition(p, 4)
        idx = AtomIndex(j=3, q=5)
        th = np.linspace(0, 2 * math.pi, 11)
        np.testing.assert_allclose(
            needlet_eval(p, part, idx, th),
            needlet_eval(p, part, idx, th + 2 * math.pi),
            atol=1e-9,
        )

    def test_central_bump_with_negative_side_lobes(self):
        # s=3, B=1.3, j=5 atom centered at pi: positive peak, symmetric
        # negative lobes on both sides
        p = FrameParams(s=3, B=1.3, eta=1e-3)
        part = build_partition(p, 5)
        Q = part.count(5)
        q = Q // 2 + 1
        x = part.center(5, q)
        th = uniform_grid(8192)
        vals = needlet_eval(p, part, AtomIndex(j=5, q=q), th)
        m = np.argmax(vals)
        assert th[m] == pytest.approx(x, abs=2 * math.pi / 8192 + 1e-12)
        assert vals.min() < -0.05 * vals.max()
        d = np.linspace(0.0, 1.0, 200)
        np.testing.assert_allclose(
            needlet_eval(p, part, AtomIndex(j=5, q=q), x + d),
            needlet_eval(p, part, AtomIndex(j=5, q=q), x - d),
            atol=1e-10,
        )


class TestLocalization:
    def test_envelope_center_and_symmetry(self):
        p = default_params()
        part = build_partition(p, 6)
        idx = AtomIndex(j=4, q=3)
        x = part.center(4, 3)
        c_s = 4.0
        assert localization_envelope(p, part, idx, x, c_s) == pytest.approx(
            math.sqrt(part.arc_length(4)) * c_s * p.B**4
        )
        d = np.linspace(0, 2.0, 50)
        np.testing.assert_allclose(
            localization_envelope(p, part, idx, x + d, c_s),
            localization_envelope(p, part, idx, x - d, c_s),
            rtol=1e-12,
        )

    def test_calibrated_envelope_dominates_on_fine_grid(self):
        from circneedlets.frame import localization_excess

        p = default_params()
        part = build_partition(p, 8)
        c_s = calibrate_envelope_constant(p, range(p.J0, 9))
        th = uniform_grid(4096)
        for j in (p.J0, 0, 4, 8):
            q = part.count(j) // 3 + 1
            idx = AtomIndex(j=j, q=q)
            # within the envelope's validity region: no violations at all
            assert localization_excess(p, part, idx, th, c_s) <= 0.0
            # near field (a few atom widths): unmasked domination
            x = part.center(j, q)
            near = x + np.linspace(-4.0, 4.0, 401) * p.B ** (-float(j))
            vals = np.abs(needlet_eval(p, part, idx, near))
            env = localization_envelope(p, part, idx, near, c_s)
            assert np.all(vals <= env * (1.0 + 1e-9))


def raised_cosine_grid(M=4096):
    return from_callable(lambda th: 1.0 + np.cos(th), M=M)


class TestAnalyze:
    def test_uniform_density_has_zero_coefficients(self):
        p = default_params()
        part = build_partition(p, 5)
        f = from_callable(lambda th: np.ones_like(th), M=4096)
        table = analyze(p, part, f, 5)
        assert table.energy() < 1e-24

    def test_raised_cosine_closed_form(self):
        # beta_jq = sqrt(lambda) w_s(B^{-2j}) cos(x_jq)
        p = default_params()
        part = build_partition(p, 4)
        table = analyze(p, part, raised_cosine_grid(), 4)
        for j in (p.J0, 0, 2, 4):
            lam = part.arc_length(j)
            expected = math.sqrt(lam) * weight(3, p.B ** (-2.0 * j)) * np.cos(part.centers(j))
            np.testing.assert_allclose(table.values[j].real, expected, atol=1e-12)
            np.testing.assert_allclose(table.values[j].imag, 0.0, atol=1e-12)

    def test_against_direct_quadrature(self):
        # <f, psi> by brute quadrature at M = 16384 on a non-bandlimited density
        model = make_model("gaussian_bump")
        p = default_params()
        part = build_partition(p, 6)
        f = from_callable(model.pdf, M=16384)
        table = analyze(p, part, f, 6)
        th = uniform_grid(16384)
        fv = model.pdf(th)
        for j, q in [(0, 1), (3, 40), (6, 1000)]:
            psi = needlet_eval(p, part, AtomIndex(j=j, q=q), th)
            direct = np.mean(fv * np.conj(psi))
            assert table[AtomIndex(j=j, q=q)] == pytest.approx(direct, abs=1e-10)

    def test_truncated_equals_exact_for_bandlimited(self):
        p = default_params()
        part = build_partition(p, 4)
        exact = analyze(p, part, raised_cosine_grid(), 4)
        trunc = analyze(p, part, raised_cosine_grid(), 4, K=1)
        assert trunc.kind == "truncated"
        for j in exact.values:
            np.testing.assert_allclose(trunc.values[j], exact.values[j], atol=1e-13)

    def test_csv_roundtrip(self, tmp_path):
        p = default_params()
        part = build_partition(p, 2)
        table = analyze(p, part, raised_cosine_grid(), 2, K=8)
        path = tmp_path / "coeffs.csv"
        coefficients_to_csv(table, path)
        back = coefficients_from_csv(path)
        assert back.kind == table.kind
        assert back.cutoffs == table.cutoffs
        for j in table.values:
            np.testing.assert_array_equal(back.values[j], table.values[j])


class TestTightness:
    @staticmethod
    def random_band_limited(rng, band=8, M=2048):
        th = uniform_grid(M)
        vals = np.zeros(M)
        for k in range(1, band + 1):
            vals += rng.normal() * np.cos(k * th) + rng.normal() * np.sin(k * th)
        vals *= 0.95 / np.max(np.abs(vals))
        return from_callable(lambda _: 1.0 + vals, M=M)

    def test_raised_cosine_closed_form_energy(self):
        # energy = (1/2) sum_j w_s(B^{-2j})^2 over the level range
        p = FrameParams(s=3, B=1.4, eta=1e-3, J0=-6)
        part = build_partition(p, 13)
        table = analyze(p, part, raised_cosine_grid(), 13)
        expected = 0.5 * sum(weight(3, p.B ** (-2.0 * j)) ** 2 for j in part.levels)
        assert table.energy() == pytest.approx(expected, rel=1e-12)

    def test_ratio_bands(self):
        rng = np.random.default_rng(2024)
        fns = [self.random_band_limited(rng) for _ in range(6)]
        p14 = FrameParams(s=3, B=1.4, eta=1e-3, J0=-6)
        lo14, hi14 = tightness_ratio(p14, build_partition(p14, 16), fns, (-6, 16))
        lam14 = lambda_Bs(3, 1.4)
        assert 0.8 * lam14 < lo14 <= hi14 < 1.2 * lam14
        p105 = FrameParams(s=3, B=1.05, eta=1e-3, J0=-42)
        lo105, hi105 = tightness_ratio(p105, build_partition(p105, 80), fns, (-42, 80))
        lam105 = lambda_Bs(3, 1.05)
        assert 0.95 * lam105 < lo105 <= hi105 < 1.05 * lam105
        # spread shrinks with B -> 1
        assert hi105 / lo105 < hi14 / lo14

    def test_uniform_rejected(self):
        p = default_params()
        part = build_partition(p, 5)
        f = from_callable(lambda th: np.ones_like(th), M=512)
        with pytest.raises(ValueError):
            tightness_ratio(p, part, [f], (p.J0, 5))

    def test_insufficient_range_rejected(self):
        rng = np.random.default_rng(5)
        f = self.random_band_limited(rng, band=4)
        p = default_params()
        part = build_partition(p, 3)
        with pytest.raises(ValueError):
            tightness_ratio(p, part, [f], (p.J0, 3))


class TestBesov:
    def test_uniform_all_zero(self):
        p = default_params()
        part = build_partition(p, 5)
        f = from_callable(lambda th: np.ones_like(th), M=1024)
        norms = besov_level_norms(analyze(p, part, f, 5), part)
        assert all(v < 1e-13 for v in norms.values())

    def test_raised_cosine_closed_form(self):
        # norm_j = w_s(B^{-2j}) sqrt(eta / 2)
        p = default_params()
        part = build_partition(p, 6)
        norms = besov_level_norms(analyze(p, part, raised_cosine_grid(), 6), part)
        for j, v in norms.items():
            assert v == pytest.approx(weight(3, p.B ** (-2.0 * j)) * math.sqrt(p.eta / 2.0), rel=1e-10)

    def test_smooth_density_decays(self):
        model = make_model("gaussian_bump")
        p = default_params()
        part = build_partition(p, 12)
        f = from_callable(model.pdf, M=16384)
        norms = besov_level_norms(analyze(p, part, f, 12), part)
        r = besov_smoothness(norms, p.B)
        assert r > 0.0

    def test_requires_exact_kind(self):
        p = default_params()
        part = build_partition(p, 3)
        table = analyze(p, part, raised_cosine_grid(), 3, K=5)
        with pytest.raises(ValueError):
            besov_level_norms(table, part)


class TestSummation:
    def test_zero_coefficients_zero_function(self):
        p = default_params()
        part = build_partition(p, 4)
        table = analyze(p, part, from_callable(lambda th: np.ones_like(th), M=1024), 4)
        out = summation(p, part, table, 4, M=1024)
        np.testing.assert_allclose(np.abs(out.values), 0.0, atol=1e-13)

    def test_band_content_preserved(self):
        # synthesis of the raised cosine has only frequency +-1 content
        p = default_params()
        part = build_partition(p, 8)
        table = analyze(p, part, raised_cosine_grid(), 8)
        k_max, spec = synthesis_spectrum(p, part, table, 8)
        ks = np.arange(-k_max, k_max + 1)
        assert np.all(np.abs(spec[np.abs(ks) != 1]) < 1e-12)
        assert abs(spec[k_max + 1]) > 0.1

    def test_near_tightness_at_small_scale_step(self):
        # ||S[F] - Lambda (F - a0)|| / ||F - a0|| small at B = 1.05
        model = make_model("gaussian_bump")
        p = FrameParams(s=3, B=1.05, eta=1e-3, J0=-40)
        part = build_partition(p, 90)
        M = 16384
        f = from_callable(model.pdf, M=M)
        table = analyze(p, part, f, 90)
        out = summation(p, part, table, 90, M=M)
        lam = p.frame_constant
        centered = from_callable(lambda th: model.pdf(th) - 1.0, M=M)
        scaled = from_callable(lambda _: out.values.real / lam, M=M)
        assert l2_distance(scaled, centered) / l2_norm(centered) < 0.05

    def test_linearity(self):
        p = default_params()
        part = build_partition(p, 5)
        f = raised_cosine_grid(M=2048)
        g = from_callable(lambda th: 1.0 + 0.3 * np.sin(2 * th), M=2048)
        combo = from_callable(lambda th: 2.0 * (1.0 + np.cos(th)) - 0.5 * (1.0 + 0.3 * np.sin(2 * th)), M=2048)
        sf = summation(p, part, analyze(p, part, f, 5), 5, M=2048)
        sg = summation(p, part, analyze(p, part, g, 5), 5, M=2048)
        sc = summation(p, part, analyze(p, part, combo, 5), 5, M=2048)
        np.testing.assert_allclose(sc.values, 2.0 * sf.values - 0.5 * sg.values, atol=1e-12)

    def test_missing_levels_rejected(self):
        p = default_params()
        part = build_partition(p, 6)
        table = analyze(p, part, raised_cosine_grid(), 4)
        with pytest.raises(ValueError):
            summation(p, part, table, 6)


class TestAtomNorms:
    def test_l2_stability_across_levels(self):
        p = default_params()
        part = build_partition(p, 12)
        vals = [atom_l2_norm_sq(p, part, j) / p.eta for j in range(3, 13)]
        mid = float(np.mean(vals))
        assert max(vals) <= 1.1 * mid
        assert min(vals) >= 0.9 * mid

    def test_l2_against_quadrature(self):
        p = default_params()
        part = build_partition(p, 5)
        th = uniform_grid(8192)
        psi = needlet_eval(p, part, AtomIndex(j=4, q=10), th)
        assert atom_l2_norm_sq(p, part, 4) == pytest.approx(np.mean(np.abs(psi) ** 2), rel=1e-10)

    def test_l1_decays_like_sqrt_scale(self):
        p = default_params()
        part = build_partition(p, 12)
        ratios = [atom_l1_norm(p, part, j) / (math.sqrt(p.eta) * p.B ** (-j / 2.0)) for j in range(3, 13)]
        assert max(ratios) < 2.0 * min(ratios)
        norms = [atom_l1_norm(p, part, j) for j in range(3, 13)]
        assert all(a > b for a, b in zip(norms, norms[1:]))


class TestBiasReport:
    def test_bandlimited_truncation_lossless(self):
        # band <= K and J at the reference level: only the coarse term remains
        p = default_params()
        f = raised_cosine_grid(M=8192)
        rep = bias_report(p, f, J=8, K=5, ref_margin=6)
        assert rep.I2 < 1e-14
        assert rep.I3 < 1e-14
        assert rep.R == pytest.approx(rep.I1, abs=1e-13)

    def test_monotone_in_J_and_K(self):
        model = make_model("von_mises", concentration=5.0)
        p = default_params()
        f = from_callable(model.pdf, M=32768)
        r_small = bias_report(p, f, J=6, K=8)
        r_J = bias_report(p, f, J=8, K=8)
        r_K = bias_report(p, f, J=6, K=12)
        assert r_J.R <= r_small.R
        assert r_K.R <= r_small.R

    def test_triangle_decomposition(self):
        model = make_model("von_mises", concentration=5.0)
        p = default_params()
        f = from_callable(model.pdf, M=32768)
        rep = bias_report(p, f, J=7, K=9)
        assert rep.R <= rep.I1 + rep.I2 + rep.I3 + 1e-12

    def test_intermediate_inequalities_hold(self):
        model = make_model("von_mises", concentration=5.0)
        p = default_params()
        f = from_callable(model.pdf, M=32768)
        for J, K in [(6, 8), (8, 10), (10, 12)]:
            rep = bias_report(p, f, J=J, K=K)
            assert rep.coeff_tail_margin <= 1.0 + 1e-9
            assert rep.atom_tail_margin <= 1.0 + 1e-9

    def test_calibrated_bounds_cover_grid(self):
        model = make_model("gaussian_bump")
        p = default_params()
        f = from_callable(model.pdf, M=32768)
        consts = calibrate_bias_constants(p, f, (6, 8, 10), (10, 20, 30), r=1.0)
        for J in (6, 8, 10):
            for K in (10, 20, 30):
                rep = bias_report(p, f, J, K, constants=consts)
                assert rep.components_within_bounds
                assert rep.R <= sum(rep.bounds) * (1.0 + 1e-9)

    def test_violated_bound_raises(self):
        from circneedlets.frame import BiasConstants

        model = make_model("von_mises", concentration=5.0)
        p = default_params()
        f = from_callable(model.pdf, M=32768)
        bogus = BiasConstants(r=1.0, log_C1=-200.0, log_C2=-200.0, log_C3=-200.0)
        with pytest.raises(InequalityViolation):
            bias_report(p, f, J=6, K=8, constants=bogus)
