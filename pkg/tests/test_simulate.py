"""Monte Carlo simulator: determinism, association rules, marginal laws."""

import math

import numpy as np
import pytest

from smallcell.geometry import ParameterError
from smallcell.pathloss import default_params, los_probability
from smallcell.simulate import (
    AssociationRule,
    BlockageMode,
    TrialConfig,
    _simulate_one,
    associate_argmax,
    associate_table1,
    estimate_association,
    estimate_coverage,
    estimate_rate,
    link_blockage_stats,
    run_batch,
    run_trial,
    summarize,
)

P = default_params()
T_DEF = P.sir_threshold


class TestAssociationRules:
    def test_equal_exponents_pick_nearest(self):
        assert associate_table1([(100.0, 5.0), (110.0, 5.0), (200.0, 5.0)]) == 1
        assert associate_argmax([(100.0, 5.0), (110.0, 5.0)]) == 1

    def test_weak_near_strong_far(self):
        # 100^-5 < 110^-2, only two links: second wins under both rules
        links = [(100.0, 5.0), (110.0, 2.0)]
        assert associate_table1(links) == 2
        assert associate_argmax(links) == 2

    def test_strong_near_stops_scan(self):
        links = [(100.0, 2.0), (110.0, 5.0), (120.0, 5.0)]
        assert associate_table1(links) == 1
        assert associate_argmax(links) == 1

    def test_table1_stops_before_global_max(self):
        # first peak at the nearest NLoS station even though the third is LoS
        links = [(100.0, 5.0), (150.0, 5.0), (200.0, 2.0)]
        assert associate_table1(links) == 1
        assert associate_argmax(links) == 3

    def test_fading_can_flip_argmax(self):
        links = [(100.0, 5.0), (120.0, 5.0)]
        assert associate_argmax(links, fading=[1.0, 10.0]) == 2

    def test_needs_two_links(self):
        with pytest.raises(ParameterError):
            associate_table1([(100.0, 5.0)])


class TestDeterminism:
    def test_run_trial_bit_identical(self):
        cfg = TrialConfig(params=P, trials=10, master_seed=99)
        assert run_trial(cfg, 4) == run_trial(cfg, 4)

    def test_batch_matches_single_trials(self):
        cfg = TrialConfig(params=P, trials=20, master_seed=5)
        batch = run_batch(cfg)
        for idx in (0, 7, 19):
            assert batch.sir[idx] == run_trial(cfg, idx).sir_linear

    def test_worker_count_invariance(self):
        cfg = TrialConfig(params=P, trials=1200, master_seed=23)
        a = run_batch(cfg, workers=1)
        b = run_batch(cfg, workers=2)
        np.testing.assert_array_equal(a.sir, b.sir)
        np.testing.assert_array_equal(a.serving_k, b.serving_k)
        np.testing.assert_array_equal(a.bin_los, b.bin_los)

    def test_out_of_range_trial(self):
        cfg = TrialConfig(params=P, trials=3, master_seed=1)
        with pytest.raises(ParameterError):
            run_trial(cfg, 3)


class TestTrialInternals:
    def test_fading_unit_mean(self):
        cfg = TrialConfig(params=P, trials=2000, master_seed=12)
        pooled = np.concatenate(
            [_simulate_one(cfg, i)["h"] for i in range(0, 2000, 1)]
        )
        assert pooled.size > 100_000
        assert pooled.mean() == pytest.approx(1.0, abs=0.01)

    def test_argmax_serving_dominates(self):
        cfg = TrialConfig(
            params=P, trials=50, master_seed=3, association=AssociationRule.ARGMAX_NO_FADING
        )
        for i in range(50):
            out = _simulate_one(cfg, i)
            served = out["power"][out["serving_k"] - 1]
            assert served >= out["power"].max()

    def test_all_los_when_no_blockages(self):
        params = default_params(blockage_intensity=0.0, alpha_los=3.0)
        cfg = TrialConfig(params=params, trials=20, master_seed=2)
        for i in range(20):
            assert _simulate_one(cfg, i)["los"].all()

    def test_low_count_regions_resample(self):
        params = default_params(bs_intensity=1e-6)
        cfg = TrialConfig(params=params, trials=30, master_seed=6, region_radius=500.0)
        batch = run_batch(cfg)
        assert batch.resamples > 0
        assert batch.trials == 30


class TestEstimators:
    @pytest.fixture(scope="class")
    def default_batch(self):
        cfg = TrialConfig(params=P, trials=20_000, master_seed=41)
        return cfg, run_batch(cfg, workers=2)

    def test_coverage_monotone_in_threshold(self, default_batch):
        cfg, batch = default_batch
        hi = estimate_coverage(cfg, 0.1, batch).probability
        lo = estimate_coverage(cfg, 1.0, batch).probability
        assert lo < hi

    def test_association_hist_sums_to_one(self, default_batch):
        cfg, batch = default_batch
        assoc = estimate_association(cfg, batch)
        assert assoc.frequencies.sum() == pytest.approx(1.0, abs=1e-12)
        assert assoc.frequencies[0] > 0.999

    def test_truncation_insensitive(self, default_batch):
        cfg, batch = default_batch
        cov = estimate_coverage(cfg, T_DEF, batch)
        wide_cfg = TrialConfig(
            params=P, trials=20_000, master_seed=41,
            region_radius=2.0 * cfg.resolved_region_radius,
        )
        wide = estimate_coverage(wide_cfg, T_DEF, workers=2)
        assert abs(wide.probability - cov.probability) <= math.hypot(
            wide.half_width, cov.half_width
        )

    def test_summary_fields(self):
        cfg = TrialConfig(params=P, trials=3000, master_seed=19)
        s = summarize(cfg, workers=2)
        assert 0.0 <= s.coverage_at_threshold <= 1.0
        assert s.mean_rate > 0.0
        assert s.association_hist.sum() == pytest.approx(1.0, abs=1e-12)
        assert s.los_frequency_by_bin
        assert s.trials == 3000


class TestBlockageModes:
    def test_probabilistic_matches_formula_by_bin(self):
        cfg = TrialConfig(params=P, trials=3000, master_seed=8, region_radius=2500.0)
        batch = run_batch(cfg, workers=2)
        for i in range(batch.bin_total.size):
            n = batch.bin_total[i]
            if n < 500:
                continue
            freq = batch.bin_los[i] / n
            pred = batch.bin_pred[i] / n
            se = math.sqrt(max(pred * (1 - pred), 1e-12) / n)
            assert abs(freq - pred) <= 3.0 * se + 3.0 / n

    def test_geometric_matches_formula_by_bin(self):
        # shared-field mode: per-link marginals still follow the closed form
        cfg = TrialConfig(
            params=P, trials=800, master_seed=14, region_radius=2500.0,
            blockage_mode=BlockageMode.GEOMETRIC,
        )
        batch = run_batch(cfg, workers=2)
        checked = 0
        for i in range(batch.bin_total.size):
            n = batch.bin_total[i]
            if n < 400:
                continue
            freq = batch.bin_los[i] / n
            pred = batch.bin_pred[i] / n
            se = math.sqrt(max(pred * (1 - pred), 1e-12) / n)
            assert abs(freq - pred) <= 3.0 * se + 3.0 / n
            checked += 1
        assert checked >= 3

    def test_geometric_vs_probabilistic_marginals(self):
        base = dict(params=P, trials=800, master_seed=25, region_radius=2000.0)
        geo = run_batch(TrialConfig(blockage_mode=BlockageMode.GEOMETRIC, **base), workers=2)
        prob = run_batch(TrialConfig(blockage_mode=BlockageMode.PROBABILISTIC, **base), workers=2)
        mask = (geo.bin_total > 300) & (prob.bin_total > 300)
        f_geo = geo.bin_los[mask] / geo.bin_total[mask]
        f_prob = prob.bin_los[mask] / prob.bin_total[mask]
        se = np.sqrt(
            f_prob * (1 - f_prob) / prob.bin_total[mask]
            + f_geo * (1 - f_geo) / geo.bin_total[mask]
        )
        assert np.all(np.abs(f_geo - f_prob) <= 3.0 * se + 3.0 / 300.0)

    def test_uniform_orientation_count_mean(self):
        # with per-rectangle orientations the angular terms average to 2/pi
        r, theta = 200.0, 0.7
        counts = link_blockage_stats(
            r, theta, P, draws=20_000, master_seed=77, uniform_orientation=True
        )
        lam_c, ll, ww = P.blockage_intensity, P.blockage_length, P.blockage_width
        mean = lam_c * (r * (ll + ww) * 2.0 / math.pi + ww * ll)
        se = math.sqrt(mean / counts.size)
        assert counts.mean() == pytest.approx(mean, abs=3.0 * se)


class TestConfigValidation:
    def test_rejects_zero_intensity(self):
        with pytest.raises(ParameterError):
            TrialConfig(params=default_params(bs_intensity=0.0), trials=10)

    def test_rejects_zero_trials(self):
        with pytest.raises(ParameterError):
            TrialConfig(params=P, trials=0)
