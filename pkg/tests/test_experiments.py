from __future__ import annotations

import math

import numpy as np
import pytest

from implicit_pf.azimuth import ModelParams, simulate_truth_batch
from implicit_pf.errors import InfeasibleBandError
from implicit_pf.experiments import (
    ExperimentConfig,
    discrepancy_errors,
    discrepancy_study,
    intrinsic_uncertainty,
    jittered_sigma,
    robustness_over_seeds,
    robustness_study,
    summarize_errors,
)
from implicit_pf.filter import run_filter_batch


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(runs=0), dict(particles=0), dict(steps=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_checkpoints(self):
        assert ExperimentConfig().checkpoints() == [40, 80, 120, 160]
        assert ExperimentConfig(steps=100).checkpoints() == [40, 80]
        assert ExperimentConfig(steps=30).checkpoints() == [30]


class TestDiscrepancy:
    def test_single_run_has_no_sd(self):
        stats = discrepancy_study(ExperimentConfig(runs=1, particles=5, steps=40, master_seed=2))
        r = stats.at(40)
        assert r.sd_x is None and r.sd_y is None
        cfg = ExperimentConfig(runs=1, particles=5, steps=40, master_seed=2)
        err, _, _ = discrepancy_errors(cfg)
        assert (r.mean_x, r.mean_y) == (err[0, 0, 0], err[0, 0, 1])

    def test_errors_match_direct_computation(self):
        cfg = ExperimentConfig(runs=7, particles=4, steps=80, master_seed=5, chunk=3)
        err, failed, _ = discrepancy_errors(cfg)
        p = cfg.params
        t = simulate_truth_batch(p, 5, range(7))
        out = run_filter_batch(t.b, p, 4, seed=5, runs=range(7))
        np.testing.assert_array_equal(err[:, 1, 0], out.estimates[:, 79, 0] - t.x[:, 79])
        assert not failed.any()

    def test_population_sd_and_se(self):
        err = np.random.default_rng(0).normal(size=(50, 1, 2))
        r = summarize_errors(err, [40])[0]
        assert r.sd_x == pytest.approx(err[:, 0, 0].std(ddof=0))
        assert r.se_y == pytest.approx(r.sd_y / math.sqrt(50))

    def test_worker_invariant(self):
        a = discrepancy_study(ExperimentConfig(runs=12, particles=3, steps=40, master_seed=1, chunk=5))
        b = discrepancy_study(ExperimentConfig(runs=12, particles=3, steps=40, master_seed=1, chunk=5, workers=2))
        assert a == b


class TestIntrinsic:
    def test_zero_sigma_gives_zero_spread(self):
        cfg = ExperimentConfig(master_seed=0, model=ModelParams(sigma=0.0))
        res = intrinsic_uncertainty(cfg, accepted_target=20)
        assert res.sd_x == [0.0] * 4 and res.sd_y == [0.0] * 4

    def test_columns_non_decreasing(self):
        res = intrinsic_uncertainty(ExperimentConfig(master_seed=0), accepted_target=100)
        assert all(np.diff(res.sd_y) >= 0) and all(np.diff(res.sd_x) >= 0)
        assert res.accepted == 100

    def test_infeasible_band(self):
        # with nearly noiseless bearings no perturbed candidate reproduces the record
        cfg = ExperimentConfig(master_seed=0, steps=40, model=ModelParams(s=1e-14))
        with pytest.raises(InfeasibleBandError):
            intrinsic_uncertainty(cfg, accepted_target=10, max_proposals=10_000, max_reference_attempts=5)

    def test_deterministic(self):
        cfg = ExperimentConfig(master_seed=3, steps=80)
        assert intrinsic_uncertainty(cfg, 30) == intrinsic_uncertainty(cfg, 30)


class TestRobustness:
    def test_zero_perturbation_is_bitwise_baseline(self):
        cfg = ExperimentConfig(runs=3, particles=10, steps=60, master_seed=4)
        r = robustness_study(cfg, perturb_x0=0.0, perturb_y0=0.0, sigma_jitter_eps=0.0)
        np.testing.assert_array_equal(r.perturbed, r.baseline)
        np.testing.assert_array_equal(r.jittered, r.baseline)

    def test_series_rows(self):
        cfg = ExperimentConfig(runs=1, particles=4, steps=10, master_seed=4)
        rows = list(robustness_study(cfg).series(0))
        assert len(rows) == 40
        assert [r[0] for r in rows[::10]] == ["truth", "baseline", "perturbed", "jittered"]

    def test_jitter_positive_and_redraws_counted(self):
        # eps close to one makes negative draws common
        draws = [jittered_sigma(1.0, 0.9, 0, r) for r in range(2000)]
        assert all(v > 0 for v, _ in draws)
        redraws = sum(n for _, n in draws)
        assert redraws > 0

    def test_jitter_redraw_rate_at_default_eps(self):
        # P(N(1, 0.4^2) <= 0) = Phi(-2.5) ~ 0.0062
        n = 20_000
        redraws = sum(jittered_sigma(1.0, 0.4, 1, r)[1] for r in range(n))
        p = 0.5 * math.erfc(2.5 / math.sqrt(2))
        expected = n * p / (1 - p)
        assert abs(redraws - expected) < 4 * math.sqrt(expected)

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            jittered_sigma(1.0, 1.0, 0, 0)

    def test_over_seeds(self):
        errs = robustness_over_seeds(ExperimentConfig(particles=4, steps=20), seeds=[0, 1, 2])
        assert set(errs) == {"baseline", "perturbed", "jittered"}
        assert errs["baseline"].shape == (3, 2)
