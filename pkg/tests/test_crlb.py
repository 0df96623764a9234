import numpy as np
import pytest

from chanest.channel import (SystemDims, TrainingDesign,
                             build_observation_operator, gen_sparse_channel,
                             make_training, observe)
from chanest.crlb import crlb_lse, crlb_lse_smp, fim_sparse, nmse_bound_db
from chanest.estimators import genie_lse
from helpers import kron_operator_oracle


def random_support(rng, dims, n_on):
    support = np.zeros(dims.size, dtype=bool)
    support[rng.choice(dims.size, n_on, replace=False)] = True
    return support


class TestCrlbLse:
    def test_orthogonal_block_is_scaled_identity(self):
        dims = SystemDims(2, 4, 4)
        training = make_training(dims)
        c = training.gram_scale
        block, trace = crlb_lse(training, 0.5, dims)
        assert np.allclose(block, (0.5 / c) * np.eye(4), atol=1e-12)
        assert abs(trace - 2 * 4 * 0.5 / c) < 1e-12

    def test_zero_noise_zero_bound(self):
        dims = SystemDims(2, 4, 4)
        _, trace = crlb_lse(make_training(dims), 0.0, dims)
        assert trace == 0.0

    def test_matches_dense_inverse_oracle(self):
        dims = SystemDims(2, 3, 5)
        training = make_training(dims, "gaussian", seed=3)
        block, trace = crlb_lse(training, 0.7, dims)
        dense = kron_operator_oracle(training.s_block, dims.n_r)
        full = 0.7 * np.linalg.inv(dense.T @ dense)
        assert np.allclose(block, full[:3, :3], atol=1e-10)
        assert abs(trace - np.trace(full)) < 1e-10

    def test_rank_deficient_training_rejected(self):
        dims = SystemDims(2, 3, 4)
        s = np.zeros((4, 3))
        s[:, 0] = 1.0
        s[:, 1] = 2.0  # dependent columns
        s[:, 2] = np.arange(4.0)
        training = TrainingDesign(s, "gaussian")
        with pytest.raises(ValueError, match="rank-deficient"):
            crlb_lse(training, 0.5, dims)


class TestFimSparse:
    def test_full_support_orthogonal(self):
        dims = SystemDims(2, 4, 4)
        training = make_training(dims)
        c = training.gram_scale
        res = fim_sparse(training, np.ones(dims.size, dtype=bool), 0.5)
        for i in range(2):
            assert np.allclose(res.fim[i], (c / 0.5) * np.eye(4), atol=1e-10)
        assert res.constraint_ok

    def test_empty_support(self):
        dims = SystemDims(2, 4, 4)
        res = fim_sparse(make_training(dims), np.zeros(dims.size, dtype=bool), 1.0)
        assert np.allclose(res.fim, 0.0)
        assert np.allclose(res.g_matrix, 0.0)
        assert res.constraint_ok
        assert res.crlb_trace == 0.0

    def test_projector_equals_support_diagonal(self):
        rng = np.random.default_rng(50)
        dims = SystemDims(2, 8, 8)
        training = make_training(dims)
        support = random_support(rng, dims, 5)
        res = fim_sparse(training, support, 0.3)
        blocks = support.reshape(2, 8)
        for i in range(2):
            assert np.max(np.abs(res.g_matrix[i] - np.diag(blocks[i]))) < 1e-10

    def test_nonpositive_noise_rejected(self):
        dims = SystemDims(2, 4, 4)
        with pytest.raises(ValueError):
            fim_sparse(make_training(dims), np.ones(dims.size, dtype=bool), 0.0)


class TestCrlbLseSmp:
    def test_orthogonal_diag_bound(self):
        dims = SystemDims(2, 4, 4)
        training = make_training(dims)
        c = training.gram_scale
        rng = np.random.default_rng(51)
        support = random_support(rng, dims, 3)
        bound, trace = crlb_lse_smp(training, support, 0.5)
        blocks = support.reshape(2, 4)
        for i in range(2):
            assert np.allclose(bound[i], (0.5 / c) * np.diag(blocks[i]),
                               atol=1e-10)
        assert abs(trace - 3 * 0.5 / c) < 1e-10

    def test_dense_limit_matches_unstructured_bound(self):
        dims = SystemDims(2, 3, 5)
        training = make_training(dims, "gaussian", seed=9)
        bound, trace = crlb_lse_smp(training, np.ones(dims.size, dtype=bool), 0.4)
        block, trace_lse = crlb_lse(training, 0.4, dims)
        for i in range(2):
            assert np.allclose(bound[i], block, atol=1e-10)
        assert abs(trace - trace_lse) < 1e-10

    def test_genie_covariance_matches_bound(self):
        # 5000 noise draws on a fixed instance: the empirical per-coordinate
        # variance of the genie estimator must match the bound diagonal
        dims = SystemDims(2, 8, 8)
        training = make_training(dims)
        op = build_observation_operator(training, dims)
        channel = gen_sparse_channel(dims, 5.0 / 16.0, seed=60)
        noise_var = 0.8
        bound, _ = crlb_lse_smp(training, channel.support, noise_var)
        bound_diag = np.concatenate([np.real(np.diag(b)) for b in bound])
        rng = np.random.default_rng(61)
        trials = 5000
        errs = np.empty((trials, dims.size))
        for i in range(trials):
            obs = observe(channel, op, noise_var, seed=rng)
            est, _ = genie_lse(obs, training, channel, noise_var)
            errs[i] = est - channel.h_v
        emp_var = errs.var(axis=0)
        on = channel.support
        assert np.all(np.abs(emp_var[on] / bound_diag[on] - 1.0) < 0.1)
        assert np.allclose(emp_var[~on], 0.0)

    def test_trace_ordering_against_lse(self):
        rng = np.random.default_rng(52)
        for trial in range(25):
            dims = SystemDims(int(rng.integers(1, 3)), 4, int(rng.integers(4, 7)))
            training = make_training(dims, "gaussian", seed=trial)
            try:
                _, lse_trace = crlb_lse(training, 0.9, dims)
            except ValueError:
                continue
            n_on = int(rng.integers(1, dims.size + 1))
            support = random_support(rng, dims, n_on)
            block, _ = crlb_lse(training, 0.9, dims)
            restricted = sum(np.real(block[j % dims.n_t, j % dims.n_t])
                             for j in np.flatnonzero(support))
            _, smp_trace = crlb_lse_smp(training, support, 0.9)
            assert smp_trace <= restricted + 1e-9

    def test_noise_scale_law(self):
        dims = SystemDims(2, 6, 8)
        training = make_training(dims, "gaussian", seed=13)
        rng = np.random.default_rng(53)
        support = random_support(rng, dims, 4)
        _, t1 = crlb_lse_smp(training, support, 0.5)
        _, t2 = crlb_lse_smp(training, support, 1.0)
        assert abs(t2 - 2.0 * t1) < 1e-10
        _, l1 = crlb_lse(training, 0.5, dims)
        _, l2 = crlb_lse(training, 1.0, dims)
        assert abs(l2 - 2.0 * l1) < 1e-10


class TestNmseBoundDb:
    def test_normalization(self):
        assert abs(nmse_bound_db(0.14, 14, 10.0) - (-30.0)) < 1e-10

    def test_invalid(self):
        with pytest.raises(ValueError):
            nmse_bound_db(1.0, 0, 10.0)
