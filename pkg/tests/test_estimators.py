import numpy as np
import pytest

from chanest.channel import (SystemDims, TrainingDesign,
                             build_observation_operator, gen_sparse_channel,
                             make_training, observe, snr_to_noise_var,
                             Observation)
from chanest.estimators import (TurboConfig, coarse_lse, fine_lse, genie_lse,
                                lasso, lse_smp, nmse, nmse_db, select_lambda)
from chanest.smp import SmpPrior
from helpers import kron_operator_oracle, normal_equations_ls


def small_problem(nr=2, nt=4, t=4, eta=0.25, snr=20.0, seed=0, kind="orthogonal"):
    dims = SystemDims(nr, nt, t)
    training = make_training(dims, kind, seed=seed)
    op = build_observation_operator(training, dims)
    channel = gen_sparse_channel(dims, eta, seed=seed)
    noise_var = snr_to_noise_var(training, dims, snr)
    obs = observe(channel, op, noise_var, seed=seed + 1000, snr_db=snr)
    return dims, training, op, channel, obs


class TestNmse:
    def test_exact(self):
        t = np.array([1.0, 2.0])
        assert nmse(t, t) == 0.0

    def test_zero_estimate(self):
        t = np.array([3.0, 4.0])
        assert abs(nmse(np.zeros(2), t) - 1.0) < 1e-15
        assert abs(nmse_db(np.zeros(2), t)) < 1e-12

    def test_double(self):
        t = np.array([1.0, -2.0, 0.5])
        assert abs(nmse(2.0 * t, t) - 1.0) < 1e-15

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            nmse(np.ones(2), np.zeros(2))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nmse(np.ones(3), np.ones(2))


class TestCoarseLse:
    def test_noise_free_exact(self):
        dims, training, op, channel, _ = small_problem()
        obs = observe(channel, op, 0.0)
        est, cov = coarse_lse(obs, training)
        assert nmse(est, channel.h_v) < 1e-20
        assert np.allclose(cov, 0.0)

    def test_identity_training(self):
        dims = SystemDims(3, 4, 4)
        training = TrainingDesign(np.eye(4), "orthogonal")
        y = np.arange(12.0)
        est, _ = coarse_lse(Observation(y, 0.0), training)
        assert np.allclose(est, y)

    def test_matches_dense_normal_equations(self):
        dims, training, op, channel, obs = small_problem(nr=2, nt=3, t=5,
                                                         kind="gaussian")
        est, cov = coarse_lse(obs, training)
        dense = kron_operator_oracle(training.s_block, dims.n_r)
        assert np.allclose(est, normal_equations_ls(dense, obs.y), atol=1e-10)
        expected_cov = obs.noise_var * np.diag(
            np.linalg.inv(dense.T @ dense))
        assert np.allclose(cov, expected_cov, atol=1e-10)

    def test_block_solve_equals_full_system(self):
        # per-antenna solving must agree with one dense solve of the lifted
        # system
        for seed in range(5):
            dims, training, op, channel, obs = small_problem(
                nr=3, nt=3, t=4, kind="gaussian", seed=seed)
            est, _ = coarse_lse(obs, training)
            dense = kron_operator_oracle(training.s_block, dims.n_r)
            assert np.allclose(est, np.linalg.lstsq(dense, obs.y, rcond=None)[0],
                               atol=1e-10)


class TestFineLse:
    def test_full_support_equals_coarse(self):
        dims, training, op, channel, obs = small_problem()
        full = np.ones(dims.size, dtype=bool)
        est_f, _ = fine_lse(obs, training, full, obs.noise_var)
        est_c, _ = coarse_lse(obs, training)
        assert np.allclose(est_f, est_c, atol=1e-10)

    def test_noise_free_correct_support_exact(self):
        dims, training, op, channel, _ = small_problem()
        obs = observe(channel, op, 0.0)
        est, v_h = fine_lse(obs, training, channel.support, 0.0)
        assert nmse(est, channel.h_v) < 1e-20
        assert np.allclose(v_h, 0.0)

    def test_matches_submatrix_oracle(self):
        dims, training, op, channel, obs = small_problem(nr=1, nt=6, t=8,
                                                         kind="gaussian")
        support = np.zeros(dims.size, dtype=bool)
        support[[0, 2, 5]] = True
        est, v_h = fine_lse(obs, training, support, obs.noise_var)
        sub = training.s_block[:, [0, 2, 5]]
        oracle = normal_equations_ls(sub, obs.y)
        assert np.allclose(est[[0, 2, 5]], oracle, atol=1e-10)
        assert np.allclose(est[~support], 0.0)
        assert np.allclose(v_h[~support], 0.0)
        assert np.allclose(v_h[support],
                           obs.noise_var * np.diag(np.linalg.inv(sub.T @ sub)),
                           atol=1e-10)

    def test_empty_support_raises(self):
        dims, training, op, channel, obs = small_problem()
        with pytest.raises(ValueError, match="no detected paths"):
            fine_lse(obs, training, np.zeros(dims.size, dtype=bool),
                     obs.noise_var)


class TestGenieLse:
    def test_equals_fine_on_truth(self):
        dims, training, op, channel, obs = small_problem()
        a, _ = genie_lse(obs, training, channel, obs.noise_var)
        b, _ = fine_lse(obs, training, channel.support, obs.noise_var)
        assert np.array_equal(a, b)

    def test_unbiased_over_noise_draws(self):
        dims = SystemDims(2, 8, 8)
        training = make_training(dims)
        op = build_observation_operator(training, dims)
        rng = np.random.default_rng(123)
        channel = gen_sparse_channel(dims, 5.0 / 16.0, seed=77)
        noise_var = 0.5
        trials = 2000
        acc = np.zeros(dims.size)
        for i in range(trials):
            obs = observe(channel, op, noise_var, seed=rng)
            est, _ = genie_lse(obs, training, channel, noise_var)
            acc += est
        mean = acc / trials
        std_err = np.sqrt(noise_var / training.t_blocks / trials)
        on = channel.support
        assert np.all(np.abs(mean[on] - channel.h_v[on]) < 3.0 * std_err)


class TestLseSmp:
    def test_single_round_runs(self):
        dims, training, op, channel, obs = small_problem()
        prior = SmpPrior.from_ratio(0.25, dims)
        res = lse_smp(obs, training, prior, TurboConfig(max_turbo_iters=1),
                      truth=channel)
        assert res.iterations_run == 1
        assert len(res.nmse_trace) == 2  # coarse phase + one round

    def test_noise_free_exact_in_one_round(self):
        dims = SystemDims(32, 64, 64)
        training = make_training(dims)
        op = build_observation_operator(training, dims)
        channel = gen_sparse_channel(dims, 0.007, seed=5)
        obs = observe(channel, op, 0.0)
        prior = SmpPrior.from_ratio(0.007, dims)
        res = lse_smp(obs, training, prior, TurboConfig(max_turbo_iters=1),
                      truth=channel)
        assert np.array_equal(res.support_hat, channel.support)
        assert res.nmse_trace[-1] < 1e-18

    def test_estimate_zero_off_support(self):
        dims, training, op, channel, obs = small_problem(snr=5.0)
        prior = SmpPrior.from_ratio(0.25, dims)
        res = lse_smp(obs, training, prior, TurboConfig(max_turbo_iters=3))
        assert np.all(res.h_v_hat[~res.support_hat] == 0.0)

    def test_fixed_point_idempotence(self):
        dims, training, op, channel, obs = small_problem(nr=4, nt=8, t=8)
        prior = SmpPrior.from_ratio(0.25, dims)
        short = lse_smp(obs, training, prior,
                        TurboConfig(max_turbo_iters=4), truth=channel)
        longer = lse_smp(obs, training, prior,
                         TurboConfig(max_turbo_iters=5), truth=channel)
        assert abs(longer.nmse_trace[-1] - short.nmse_trace[-1]) < 1e-12

    def test_early_stop(self):
        dims, training, op, channel, obs = small_problem(nr=4, nt=8, t=8)
        prior = SmpPrior.from_ratio(0.25, dims)
        res = lse_smp(obs, training, prior,
                      TurboConfig(max_turbo_iters=8, stop_tol=1e-9),
                      truth=channel)
        assert res.diagnostics["early_stopped"]
        assert res.iterations_run < 8

    def test_empty_support_fallback_records_diagnostic(self):
        # at very low snr nothing clears the threshold; the loop must fall
        # back to the best single entry instead of failing
        dims, training, op, channel, obs = small_problem(snr=-40.0, seed=3)
        prior = SmpPrior.from_ratio(0.25, dims)
        res = lse_smp(obs, training, prior,
                      TurboConfig(max_turbo_iters=2, threshold=0.999))
        assert res.support_hat.sum() >= 1
        assert res.diagnostics.get("support_fallbacks")

    def test_top_l_rule(self):
        dims, training, op, channel, obs = small_problem(snr=30.0)
        prior = SmpPrior.from_ratio(0.25, dims)
        res = lse_smp(obs, training, prior,
                      TurboConfig(max_turbo_iters=3, support_rule="top_l",
                                  top_l=channel.sparsity))
        assert res.support_hat.sum() == channel.sparsity

    def test_beats_plain_lse_on_sparse_channels(self):
        dims = SystemDims(32, 64, 64)
        training = make_training(dims)
        op = build_observation_operator(training, dims)
        prior = SmpPrior.from_ratio(0.007, dims)
        noise_var = snr_to_noise_var(training, dims, 20.0)
        cfg = TurboConfig(max_turbo_iters=5, threshold=0.95)
        err_smp = err_lse = ref = 0.0
        for seed in range(40):
            channel = gen_sparse_channel(dims, 0.007, seed=seed)
            obs = observe(channel, op, noise_var, seed=seed + 10_000)
            res = lse_smp(obs, training, prior, cfg, truth=channel)
            e2 = float(np.linalg.norm(channel.h_v) ** 2)
            coarse, _ = coarse_lse(obs, training)
            err_smp += res.nmse_trace[-1] * e2
            err_lse += float(np.linalg.norm(coarse - channel.h_v) ** 2)
            ref += e2
        gain_db = 10.0 * np.log10(err_lse / err_smp)
        assert gain_db > 10.0

    def test_result_serialization(self):
        dims, training, op, channel, obs = small_problem()
        prior = SmpPrior.from_ratio(0.25, dims)
        res = lse_smp(obs, training, prior, TurboConfig(max_turbo_iters=2),
                      truth=channel)
        d = res.to_dict()
        assert d["iterations_run"] == 2
        assert len(d["support_indices"]) == len(d["values"])
        assert len(d["nmse_trace"]) == 3


class TestTurboConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(max_turbo_iters=0),
        dict(inner_iters=0),
        dict(damping=0.0),
        dict(damping=1.5),
        dict(support_rule="bogus"),
        dict(support_rule="top_l"),
        dict(threshold=1.0),
        dict(stop_tol=-1.0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TurboConfig(**kwargs)


class TestLasso:
    def test_zero_penalty_orthogonal_equals_coarse(self):
        dims, training, op, channel, obs = small_problem()
        est = lasso(obs, training, 0.0, max_iters=200, tol=1e-12)
        coarse, _ = coarse_lse(obs, training)
        assert np.allclose(est, coarse, atol=1e-8)

    def test_full_shrinkage(self):
        dims, training, op, channel, obs = small_problem()
        lam = float(np.max(np.abs(op.rmatvec(obs.y)))) * 1.01
        est = lasso(obs, training, lam)
        assert np.all(est == 0.0)

    def test_identity_soft_threshold(self):
        dims = SystemDims(1, 2, 2)
        training = TrainingDesign(np.eye(2), "orthogonal")
        obs = Observation(np.array([3.0, -0.5]), 0.0)
        est = lasso(obs, training, 1.0, max_iters=50, tol=1e-14)
        assert np.allclose(est, [2.0, 0.0], atol=1e-12)

    def test_negative_penalty_rejected(self):
        dims, training, op, channel, obs = small_problem()
        with pytest.raises(ValueError):
            lasso(obs, training, -0.5)

    def test_optimality_certificate(self):
        dims, training, op, channel, obs = small_problem(nr=2, nt=6, t=8,
                                                         kind="gaussian",
                                                         snr=15.0)
        lam = 0.8
        est = lasso(obs, training, lam, max_iters=20000, tol=1e-14)
        grad = op.rmatvec(obs.y - op.matvec(est))
        tol = 1e-5
        on = est != 0.0
        assert np.all(np.abs(grad[~on]) <= lam + tol)
        assert np.all(np.abs(np.abs(grad[on]) - lam) <= tol)
        assert np.allclose(np.sign(grad[on]), np.sign(est[on]))


class TestSelectLambda:
    def test_single_element_grid(self):
        dims, training, op, channel, obs = small_problem()
        assert select_lambda(obs, training, [0.7], truth=channel) == 0.7

    def test_oracle_picks_measured_argmin(self):
        dims, training, op, channel, obs = small_problem(nr=4, nt=8, t=8)
        grid = [0.01, 0.1, 1.0, 10.0]
        best = select_lambda(obs, training, grid, truth=channel)
        scores = [nmse(lasso(obs, training, lam), channel.h_v) for lam in grid]
        assert best == grid[int(np.argmin(scores))]

    def test_blind_default(self):
        dims = SystemDims(32, 64, 64)
        training = make_training(dims)
        obs = Observation(np.zeros(dims.n_r * dims.t_blocks), noise_var=1.0)
        lam = select_lambda(obs, training, [1.0])
        assert abs(lam - np.sqrt(2.0 * np.log(2048.0))) < 1e-12
        assert abs(lam - 3.905) < 5e-4

    def test_empty_grid_rejected(self):
        dims, training, op, channel, obs = small_problem()
        with pytest.raises(ValueError):
            select_lambda(obs, training, [])
