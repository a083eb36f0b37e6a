import math

import numpy as np
import pytest

from seqscreen import (BoundParams, NoiseConfig, SequenceStrategy,
                       SolverConfig, estimate_dual_bound, gen_synthetic,
                       geometric_grid, inject_noise, lambda_max,
                       n_upper_bound, next_lambda_dass,
                       next_lambda_dpp_feedback, run_sequence)
from seqscreen.errors import UsageError
from seqscreen.formats import validate_trace

from conftest import solve_exact


class TestStrategyValidation:
    def test_kinds_and_parameters(self):
        SequenceStrategy(kind="dass", R=0.4)
        SequenceStrategy(kind="dpp_feedback", R=0.4)
        SequenceStrategy(kind="geometric", N=10, rule="strong")
        with pytest.raises(UsageError):
            SequenceStrategy(kind="dass")
        with pytest.raises(UsageError):
            SequenceStrategy(kind="dass", R=0.4, N=5)
        with pytest.raises(UsageError):
            SequenceStrategy(kind="geometric", N=1)
        with pytest.raises(UsageError):
            SequenceStrategy(kind="geometric", N=5, R=0.1)
        with pytest.raises(UsageError):
            SequenceStrategy(kind="dass", R=0.4, rule="dpp")
        with pytest.raises(UsageError):
            SequenceStrategy(kind="dass", R=0.4, lambda1_factor=1.0)

    def test_default_rules(self):
        assert SequenceStrategy(kind="dass", R=1.0).effective_rule == "dome"
        assert SequenceStrategy(kind="geometric", N=3).effective_rule == "dome"
        assert SequenceStrategy(
            kind="dpp_feedback", R=1.0).effective_rule == "dpp"


class TestLambdaUpdates:
    def test_dass_worked_example(self):
        # quad = 1, R = 0.2: 1/lambda goes 1 -> 1.1
        x = np.array([1.0, 0.0])
        n = np.array([0.0, 1.0])
        assert next_lambda_dass(1.0, x, n, 0.2) == \
            pytest.approx(1.0 / 1.1, abs=1e-12)

    def test_dass_shrinks_with_alignment(self):
        # The more x projects onto n, the smaller the quadratic form and the
        # bigger the jump.
        x = np.array([1.0, 1.0])
        loose = next_lambda_dass(1.0, x, np.array([0.0, 1.0]), 0.4)
        tight = next_lambda_dass(1.0, x, np.array([0.6, 0.8]), 0.4)
        assert tight < loose

    def test_dass_degenerate_floor(self):
        # x parallel to n: the quadratic form collapses and falls back to
        # ||x||^2, keeping the step finite.
        x = np.array([2.0, 0.0])
        lam = next_lambda_dass(1.0, x, np.array([1.0, 0.0]), 0.4)
        assert lam == pytest.approx(1.0 / (1.0 + 0.2 / 2.0), abs=1e-12)

    def test_dpp_feedback_worked_examples(self):
        assert next_lambda_dpp_feedback(1.0, 0.4) == \
            pytest.approx(1.0 / 1.2, abs=1e-15)
        assert next_lambda_dpp_feedback(1.0, 2.0) == pytest.approx(0.5)

    def test_dpp_feedback_sphere_diameter_is_R(self):
        lam = next_lambda_dpp_feedback(0.7, 0.4)
        assert 2.0 * (1.0 / lam - 1.0 / 0.7) == pytest.approx(0.4, abs=1e-12)

    def test_geometric_grid(self):
        grid = geometric_grid(1.0, 0.125, 4)
        assert np.allclose(grid, [1.0, 0.5, 0.25, 0.125], atol=1e-12)
        assert grid[0] == 1.0 and grid[-1] == 0.125
        two = geometric_grid(0.9, 0.1, 2)
        assert list(two) == [0.9, 0.1]
        long = geometric_grid(1.0, 1e-3, 50)
        ratios = long[1:] / long[:-1]
        assert np.allclose(ratios, ratios[0], atol=1e-12)

    def test_invalid_updates(self):
        with pytest.raises(UsageError):
            next_lambda_dass(0.0, np.ones(2), np.array([1.0, 0.0]), 0.4)
        with pytest.raises(UsageError):
            next_lambda_dpp_feedback(1.0, 0.0)
        with pytest.raises(UsageError):
            geometric_grid(0.5, 0.9, 4)


class TestNUpperBound:
    def test_worked_examples(self):
        b = n_upper_bound(0.1, 0.4, BoundParams(C=1.0))
        assert b == pytest.approx(1.0 + math.log(10.0) / math.log(1.2),
                                  abs=1e-12)
        b2 = n_upper_bound(0.1, 0.4, BoundParams(C=1.0, rho=0.1))
        assert b2 == pytest.approx(
            1.0 + math.log(10.0) / math.log(1.0 + 0.4 / 2.2), abs=1e-12)
        assert b2 > b

    def test_limit_cases(self):
        assert n_upper_bound(1.0, 0.4, BoundParams(C=1.0)) == 1.0
        assert n_upper_bound(2.0, 0.4, BoundParams(C=1.0)) == 1.0
        with pytest.raises(UsageError):
            n_upper_bound(0.0, 0.4, BoundParams(C=1.0))

    def test_bound_params_validation(self):
        with pytest.raises(UsageError):
            BoundParams(C=0.0)
        with pytest.raises(UsageError):
            BoundParams(C=1.0, rho=-0.1)


class TestInjectNoise:
    def test_zero_nsr_identity(self):
        w = np.array([1.0, -2.0, 0.5])
        out = inject_noise(w, NoiseConfig(nsr=0.0, threshold=0.0))
        assert np.array_equal(out, w)

    def test_noise_power_matches_ratio(self):
        rng = np.random.default_rng(5)
        w = rng.standard_normal(10_000)
        out = inject_noise(w, NoiseConfig(nsr=0.01, threshold=0.0, seed=3))
        ratio = float(np.mean((out - w) ** 2)) / float(np.mean(w ** 2))
        assert ratio == pytest.approx(0.01, rel=0.05)

    def test_thresholding(self):
        w = np.array([1.0, 1e-5, -1e-5, 0.5])
        out = inject_noise(w, NoiseConfig(nsr=0.0, threshold=1e-3))
        assert np.array_equal(out, [1.0, 0.0, 0.0, 0.5])
        wiped = inject_noise(w, NoiseConfig(nsr=0.0, threshold=np.inf))
        assert np.array_equal(wiped, np.zeros(4))
        # nsr = 0 with the default threshold is the identity
        assert np.array_equal(inject_noise(w, NoiseConfig(nsr=0.0)), w)

    def test_default_threshold_tracks_noise_scale(self):
        w = np.ones(1000)
        out = inject_noise(w, NoiseConfig(nsr=1e-8, seed=1))
        # 3 sigma = 3e-4: no entry of w + noise falls below it
        assert np.allclose(out, w, atol=1e-3)
        assert np.count_nonzero(out) == 1000

    def test_zero_signal_warns(self):
        with pytest.warns(UserWarning):
            out = inject_noise(np.zeros(3), NoiseConfig(nsr=0.1))
        assert np.array_equal(out, np.zeros(3))

    def test_determinism(self):
        w = np.ones(100)
        cfg = NoiseConfig(nsr=0.1, threshold=0.0, seed=9)
        assert np.array_equal(inject_noise(w, cfg), inject_noise(w, cfg))


class TestRunSequence:
    def run(self, seed=11, ratio=0.1, strategy=None, **kw):
        D, x = gen_synthetic(20, 100, seed)
        lmax = lambda_max(D, x).lambda_max
        strategy = strategy or SequenceStrategy(kind="dass", R=0.4)
        trace = run_sequence(D, x, ratio * lmax, strategy, **kw)
        return D, x, lmax, trace

    def test_matches_unscreened_solve(self):
        D, x, lmax, trace = self.run(
            solver=SolverConfig(gap_tol=1e-10))
        ref = solve_exact(D, x, 0.1 * lmax)
        assert np.array_equal(np.abs(trace.w_final) > 1e-9,
                              np.abs(ref.w) > 1e-9)
        assert np.max(np.abs(trace.w_final - ref.w)) < 1e-6

    def test_lambda_path_invariants(self):
        _, _, lmax, trace = self.run()
        lams = np.array(trace.lambdas)
        assert lams[0] == pytest.approx(0.95 * lmax)
        assert np.all(np.diff(lams) < 0)
        assert lams[-1] == 0.1 * lmax
        assert trace.N == len(lams) == len(trace.steps)

    def test_dass_diameter_budget(self):
        for R in (0.25, 0.7):
            _, _, _, trace = self.run(
                strategy=SequenceStrategy(kind="dass", R=R))
            for s in trace.steps[1:]:
                assert s.region_diameter <= R + 1e-9

    def test_dpp_feedback_step_count(self):
        _, _, lmax, trace = self.run(
            strategy=SequenceStrategy(kind="dpp_feedback", R=0.4))
        z = 1.0 / (0.1 * lmax) - 1.0 / (0.95 * lmax)
        assert trace.N == 1 + math.ceil(2.0 * z / 0.4 - 1e-9)

    def test_geometric_grid_run(self):
        _, _, lmax, trace = self.run(
            strategy=SequenceStrategy(kind="geometric", N=8))
        assert trace.N == 8
        assert np.allclose(trace.lambdas,
                           geometric_grid(0.95 * lmax, 0.1 * lmax, 8))

    def test_target_at_or_above_lambda_max(self):
        D, x, lmax, _ = self.run()
        for lam_t in (lmax, 1.5 * lmax):
            trace = run_sequence(D, x, lam_t,
                                 SequenceStrategy(kind="dass", R=0.4))
            assert trace.N == 1
            assert np.array_equal(trace.w_final, np.zeros(100))
            assert trace.steps[0].kept_count == 0

    def test_target_above_lambda1_single_step(self):
        D, x, lmax, _ = self.run()
        trace = run_sequence(D, x, 0.97 * lmax,
                             SequenceStrategy(kind="dass", R=0.4))
        assert trace.N == 1
        assert trace.lambdas == [pytest.approx(0.97 * lmax)]
        ref = solve_exact(D, x, 0.97 * lmax)
        assert np.max(np.abs(trace.w_final - ref.w)) < 1e-6

    def test_strong_rule_records_false_rejections(self):
        _, _, _, trace = self.run(
            strategy=SequenceStrategy(kind="geometric", N=8, rule="strong"))
        for s in trace.steps:
            assert s.false_rejections is not None
            assert s.false_rejections >= 0

    def test_safe_rules_leave_false_rejections_null(self):
        _, _, _, trace = self.run()
        assert all(s.false_rejections is None for s in trace.steps)

    def test_trace_document_validates(self):
        for strategy in (SequenceStrategy(kind="dass", R=0.4),
                         SequenceStrategy(kind="dpp_feedback", R=0.6),
                         SequenceStrategy(kind="geometric", N=5,
                                          rule="strong")):
            _, _, _, trace = self.run(strategy=strategy)
            validate_trace(trace.to_json_dict())

    def test_noise_changes_path_but_reaches_target(self):
        D, x, lmax, clean = self.run(solver=SolverConfig(gap_tol=1e-10))
        _, _, _, noisy = self.run(
            solver=SolverConfig(gap_tol=1e-10),
            noise=NoiseConfig(nsr=1e-8, seed=2))
        assert noisy.lambdas[-1] == 0.1 * lmax
        ref = solve_exact(D, x, 0.1 * lmax)
        # perturbations at this level must not disturb the final solve
        assert np.max(np.abs(noisy.w_final - ref.w)) < 1e-6

    def test_dual_bound_estimate(self):
        _, _, _, trace = self.run()
        params = estimate_dual_bound(trace)
        assert params.C >= max(s.theta_norm for s in trace.steps) - 1e-15
        assert params.rho >= 0.0

    def test_invalid_target(self):
        D, x, _, _ = self.run()
        with pytest.raises(UsageError):
            run_sequence(D, x, 0.0, SequenceStrategy(kind="dass", R=0.4))
