"""Analytical layer: distance law, Laplace transform, coverage, rate, association."""

import math

import numpy as np
import pytest

from smallcell.analysis import (
    LaplaceMode,
    ModelError,
    _laplace_exponents,
    association_distribution,
    association_probability,
    average_rate,
    conditional_rate,
    coverage_probabilities,
    coverage_probability,
    kth_nearest_distance_pdf,
    laplace_interference,
    sir_ccdf,
    sir_pdf,
    sir_pdf_finite_difference,
)
from smallcell.analysis import _sir_pdf_values
from smallcell.geometry import TAU, ParameterError
from smallcell.pathloss import default_params, los_probability
from smallcell.quadrature import QuadratureSpec, integrate_2d, integrate_semi_infinite
from smallcell.simulate import TrialConfig, estimate_rate

P = default_params()
T_DEF = 10.0**-0.5
LAM_B = P.bs_intensity


class TestDistanceLaw:
    def test_hand_value(self):
        # k=1 at r=800: 2 pi lam * 800 * e^(-pi lam 800^2)
        val = kth_nearest_distance_pdf(800.0, 1, LAM_B)
        assert val == pytest.approx(2.0 / 640000.0 * 800.0 * math.exp(-1.0), rel=1e-12)
        assert val == pytest.approx(9.19699e-4, rel=1e-5)

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_normalization(self, k):
        res = integrate_semi_infinite(
            lambda r: kth_nearest_distance_pdf(r, k, LAM_B),
            0.0,
            "exp_quadratic",
            scale=math.sqrt((k + 1) / (math.pi * LAM_B)),
        )
        assert res.value == pytest.approx(1.0, abs=1e-8)

    def test_nearest_mean_distance(self):
        res = integrate_semi_infinite(
            lambda r: r * kth_nearest_distance_pdf(r, 1, LAM_B),
            0.0,
            "exp_quadratic",
            scale=1.0 / math.sqrt(math.pi * LAM_B),
        )
        assert res.value == pytest.approx(1.0 / (2.0 * math.sqrt(LAM_B)), rel=1e-9)

    def test_bad_args(self):
        with pytest.raises(ParameterError):
            kth_nearest_distance_pdf(1.0, 0, LAM_B)
        with pytest.raises(ParameterError):
            kth_nearest_distance_pdf(1.0, 1, 0.0)


class TestLaplace:
    def test_at_zero(self):
        for mode in LaplaceMode:
            res = laplace_interference(0.0, 300.0, P, mode)
            assert res.value == 1.0 and res.converged

    def test_no_interferers(self):
        empty = default_params(bs_intensity=0.0)
        assert laplace_interference(5.0, 300.0, empty).value == 1.0

    def test_monotone_in_s(self):
        vals = [laplace_interference(s, 400.0, P).value for s in (1e3, 1e5, 1e7)]
        assert vals[0] > vals[1] > vals[2]

    def test_factored_form_matches_raw_double_integral(self):
        # the implementation folds the angle integral into the azimuth factor;
        # rebuild the raw (theta, r) iterated integral and compare
        r_k, s = 400.0, T_DEF * 400.0**P.alpha_nlos
        lc, ll, lw = P.blockage_intensity, P.blockage_length, P.blockage_width
        phi = P.blockage_orientation

        def raw(theta, r):
            p_los = np.exp(
                -lc
                * (
                    r * ll * abs(math.sin(phi - theta))
                    + r * lw * abs(math.cos(phi - theta))
                    + lw * ll
                )
            )
            s_n = s * r ** (-P.alpha_nlos)
            s_l = s * r ** (-P.alpha_los)
            g = s_n / (1.0 + s_n) + p_los * (1.0 / (1.0 + s_n) - 1.0 / (1.0 + s_l))
            return g * r

        res = integrate_2d(
            raw, 0.0, TAU, r_k, math.inf,
            spec=QuadratureSpec(1e-10, 1e-9, 400_000),
            inner_decay="power", inner_scale=r_k,
        )
        direct = laplace_interference(s, r_k, P)
        assert direct.value == pytest.approx(math.exp(-LAM_B * res.value), rel=1e-7)

    def test_bound_mode_flagged_degenerate(self):
        res = laplace_interference(T_DEF * 400.0**5, 400.0, P, LaplaceMode.BESSEL_BOUND)
        assert not res.converged
        assert res.value == 0.0

    def test_bound_mode_orders_above_exact(self):
        # the closed-form azimuth substitution is claimed to upper-bound the
        # transform; its radial integral actually diverges, so this records
        # the claim failing rather than a loose-but-valid bound
        for r_k in (100.0, 200.0, 400.0, 800.0):
            for factor in (0.1, 1.0):
                for alpha in (P.alpha_los, P.alpha_nlos):
                    s = factor * T_DEF * r_k**alpha
                    exact = laplace_interference(s, r_k, P, LaplaceMode.EXACT_ANGULAR)
                    bound = laplace_interference(s, r_k, P, LaplaceMode.BESSEL_BOUND)
                    assert bound.value >= exact.value, (
                        f"bound {bound.value} fell below exact {exact.value} at "
                        f"(s={s:.3g}, r_k={r_k}): the closed-form substitution "
                        "grows exponentially and drives the transform to zero"
                    )

    def test_all_los_alpha2_rejected(self):
        bad = default_params(blockage_intensity=0.0)  # alpha_los = 2
        with pytest.raises(ModelError):
            laplace_interference(1.0, 100.0, bad)


class TestCoverage:
    def test_tiny_threshold_is_sure(self):
        cov = coverage_probability(1, 1e-6, P)
        assert cov.probability >= 0.999

    def test_all_nlos_closed_form(self):
        # blockage everywhere, exponent 4: 1/(1 + sqrt(T)(pi/2 - atan(1/sqrt(T))))
        params = default_params(blockage_intensity=1e3, alpha_nlos=4.0)
        cov = coverage_probability(1, 1.0, params)
        assert cov.probability == pytest.approx(1.0 / (1.0 + math.pi / 4.0), abs=1e-3)

    def test_monotone_in_threshold(self):
        ts = np.array([0.01, 0.1, 0.316, 1.0, 3.16, 10.0])
        vals = [c.probability for c in coverage_probabilities(1, ts, P)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_monotone_in_k(self):
        vals = [coverage_probability(k, T_DEF, P).probability for k in range(1, 6)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_intensity_orderings_on_quoted_grid(self):
        # quoted trends: coverage should not increase with blockage intensity
        # and should not decrease with BS intensity on this parameter set
        lam_bs = [1.0 / (800.0**2 * math.pi), 1.0 / (200.0**2 * math.pi)]
        lam_cs = [0.0002, 0.002]
        cov = {
            (lb, lc): coverage_probability(
                1, T_DEF, default_params(bs_intensity=lb, blockage_intensity=lc)
            ).probability
            for lb in lam_bs
            for lc in lam_cs
        }
        for lb in lam_bs:
            assert cov[(lb, 0.002)] <= cov[(lb, 0.0002)], (
                "coverage rose with blockage intensity: blockages attenuate the "
                "dominant far-field LoS interference more than they hurt the "
                "serving link at this threshold"
            )
        for lc in lam_cs:
            assert cov[(lam_bs[1], lc)] >= cov[(lam_bs[0], lc)], (
                "coverage fell with BS intensity (scale equivalence of the "
                "blockage geometry)"
            )

    def test_rejects_bad_inputs(self):
        with pytest.raises(ParameterError):
            coverage_probability(0, 1.0, P)
        with pytest.raises(ParameterError):
            coverage_probability(1, 0.0, P)
        with pytest.raises(ModelError):
            coverage_probability(1, 1.0, default_params(bs_intensity=0.0))
        with pytest.raises(ModelError):
            coverage_probability(1, 1.0, default_params(blockage_intensity=0.0))


class TestSirDistribution:
    def test_ccdf_limits(self):
        assert sir_ccdf(1, 1e-6, P).probability >= 0.999
        assert sir_ccdf(1, 1e8, P).probability <= 0.01

    def test_ccdf_monotone(self):
        grid = [0.01, 0.1, 1.0, 10.0, 100.0]
        vals = [sir_ccdf(1, t, P).probability for t in grid]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_pdf_nonnegative(self):
        for t in (0.05, 0.5, 5.0, 50.0):
            assert sir_pdf(1, t, P).value >= 0.0

    def test_pdf_matches_finite_difference(self):
        for t in (0.1, 10.0**-0.5, 1.0, 10.0**0.5):
            analytic = sir_pdf(1, t, P).value
            fd = sir_pdf_finite_difference(1, t, P)
            assert abs(analytic - fd) <= 1e-4

    def test_pdf_normalizes(self):
        # the SIR tail is algebraic (CCDF ~ t^(-2/alpha_nlos)), so the
        # normalization integral needs the power transform to reach it
        def f(t_batch):
            vals, _, _ = _sir_pdf_values(1, t_batch, P, LaplaceMode.EXACT_ANGULAR, 1e-7)
            return vals

        res = integrate_semi_infinite(
            f, 0.0, "power", QuadratureSpec(1e-5, 1e-5, 3_000), scale=1.0
        )
        assert res.value == pytest.approx(1.0, abs=1e-3)


class TestConditionalRate:
    def test_no_interferers_rejected(self):
        with pytest.raises(ModelError):
            conditional_rate(1, default_params(bs_intensity=0.0))

    def test_dual_paths_agree(self):
        a = conditional_rate(1, P, method="ccdf")
        b = conditional_rate(1, P, method="pdf")
        assert abs(a.value - b.value) / a.value <= 0.01
        assert a.converged and b.converged

    def test_all_nlos_alpha4_vs_mc(self):
        params = default_params(blockage_intensity=1e3, alpha_nlos=4.0)
        analytic = conditional_rate(1, params).value
        cfg = TrialConfig(params=params, trials=100_000, master_seed=17)
        mc, _ = estimate_rate(cfg)
        assert analytic == pytest.approx(mc, rel=0.02)


class TestAssociation:
    def test_all_los_limit_exact(self):
        params = default_params(blockage_intensity=0.0, alpha_los=3.0)
        assert association_probability(1, params).probability == 1.0
        assert association_probability(2, params).probability == 0.0

    def test_all_nlos_limit_exact(self):
        params = default_params(blockage_intensity=1e3)
        assert association_probability(1, params).probability == 1.0
        assert association_probability(3, params).probability == 0.0

    def test_defaults_distribution(self):
        dist = association_distribution(P, k_max=5, mc_samples=100_000, seed=4)
        assert dist.probs[0] > 0.999
        total = sum(dist.probs) + dist.tail_mass
        assert total == pytest.approx(1.0, abs=1e-12)
        assert abs(dist.tail_mass) <= 0.005
        # beyond the second station the sequential rule cannot fire
        assert dist.probs[2] == 0.0 and dist.probs[3] == 0.0

    def test_sum_near_one_in_mixed_regime(self):
        params = default_params(
            bs_intensity=2e-5, blockage_intensity=5e-4
        )  # association genuinely spread
        dist = association_distribution(params, k_max=5, mc_samples=150_000, seed=8)
        assert sum(dist.probs) + dist.tail_mass == pytest.approx(1.0, abs=1e-12)
        assert dist.probs[1] > 0.01  # second station matters here
        total_12 = dist.probs[0] + dist.probs[1]
        assert total_12 == pytest.approx(1.0, abs=3.0 * dist.standard_errors[1] + 1e-9)


class TestAverageRate:
    def test_all_los_reduces_to_nearest(self):
        params = default_params(blockage_intensity=0.0, alpha_los=3.0)
        avg = average_rate(params, k_max=3, rate_tol=1e-4)
        single = conditional_rate(1, params, result_tol=1e-4)
        assert avg.value == pytest.approx(single.value, rel=1e-6)
        assert avg.tail_mass == pytest.approx(0.0, abs=1e-12)

    def test_bs_intensity_ordering(self):
        # quoted trend: densifying BSs should not lower the rate here
        dense = default_params(bs_intensity=1.0 / (200.0**2 * math.pi))
        sparse = default_params(bs_intensity=1.0 / (800.0**2 * math.pi))
        r_dense = average_rate(dense, mc_samples=50_000, seed=3, rate_tol=1e-3)
        r_sparse = average_rate(sparse, mc_samples=50_000, seed=3, rate_tol=1e-3)
        assert r_dense.value >= r_sparse.value

    def test_tx_power_cancels(self):
        boosted = default_params(tx_power=1000.0)
        a = coverage_probability(1, T_DEF, P)
        b = coverage_probability(1, T_DEF, boosted)
        assert a.probability == b.probability
        ra = conditional_rate(2, P, result_tol=1e-3)
        rb = conditional_rate(2, boosted, result_tol=1e-3)
        assert ra.value == rb.value
