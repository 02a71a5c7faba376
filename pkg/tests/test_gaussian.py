import math

import numpy as np
import pytest

from mcmot.gaussian import (
    GaussianBelief,
    TransitionCache,
    backward_sample,
    filter_pass,
    gaussian_logpdf,
    log_marginal_likelihood,
    robust_cholesky,
    smoother_marginals,
)
from mcmot.model import ModelParams

from .oracles import (
    lgssm_log_marginal,
    lgssm_posterior,
    matrix_power_chain,
    scalar_gauss_logpdf,
)


def make_params(**kw):
    base = dict(
        F=[[1.0]], Q=[[1.0]], H=[[1.0]], R=[[1.0]],
        mu0=[0.0], Sigma0=[[100.0]],
        mu_fp=[0.0], Sigma_fp=[[100.0]],
        lambda_b=0.1, lambda_f=0.5, p_d=0.9, p_lam=0.1,
    )
    base.update(kw)
    return ModelParams(**base)


class TestFilterPass:
    def test_single_observation_conjugate_update(self):
        # conjugate Gaussian update: mean = S0*y/(S0+R), var = S0*R/(S0+R)
        p = make_params()
        steps = filter_pass([1], [[2.0]], p)
        assert steps[0].predicted.mean[0] == 0.0
        assert steps[0].predicted.cov[0, 0] == 100.0
        assert steps[0].filtered.mean[0] == pytest.approx(200.0 / 101.0, abs=1e-12)
        assert steps[0].filtered.cov[0, 0] == pytest.approx(100.0 / 101.0, abs=1e-12)

    def test_gap_prediction_is_three_chained_one_steps(self):
        p = make_params()
        steps = filter_pass([1, 4], [[2.0], [3.0]], p)
        m, P = steps[0].filtered.mean[0], steps[0].filtered.cov[0, 0]
        # F=1, Q=1: three one-step predictions add 1 to the variance each
        assert steps[1].predicted.mean[0] == pytest.approx(m)
        assert steps[1].predicted.cov[0, 0] == pytest.approx(P + 3.0, abs=1e-12)

    def test_uninformative_observation_leaves_prediction(self):
        p = make_params(R=[[1e12]])
        steps = filter_pass([1, 2], [[2.0], [5.0]], p)
        f, pr = steps[1].filtered, steps[1].predicted
        assert f.mean[0] == pytest.approx(pr.mean[0], abs=1e-6)
        assert f.cov[0, 0] == pytest.approx(pr.cov[0, 0], rel=1e-6)

    def test_rejects_non_increasing_times(self):
        p = make_params()
        with pytest.raises(ValueError):
            filter_pass([2, 2], [[0.0], [1.0]], p)

    def test_rejects_dimension_mismatch(self):
        p = make_params()
        with pytest.raises(ValueError):
            filter_pass([1], [[0.0, 1.0]], p)


class TestTransitionCache:
    @pytest.mark.parametrize("gap", [1, 2, 3, 5, 8, 13])
    def test_matches_chained_one_step_predictions(self, gap):
        F = np.array([[1.0, 0.9], [0.0, 0.8]])
        Q = np.array([[0.3, 0.1], [0.1, 0.2]])
        cache = TransitionCache(F, Q)
        Fg, Qg = cache(gap)
        Fo, Qo = matrix_power_chain(F, Q, gap)
        np.testing.assert_allclose(Fg, Fo, atol=1e-12)
        np.testing.assert_allclose(Qg, Qo, atol=1e-12)


class TestLogMarginalLikelihood:
    def test_single_observation_closed_form(self):
        p = make_params()
        got = log_marginal_likelihood([1], [[2.0]], p)
        assert got == pytest.approx(scalar_gauss_logpdf(2.0, 0.0, 101.0), abs=1e-12)

    def test_broad_prior_is_flat(self):
        p = make_params(Sigma0=[[1e12]])
        a = log_marginal_likelihood([1], [[2.0]], p)
        b = log_marginal_likelihood([1], [[40.0]], p)
        assert a == pytest.approx(b, abs=1e-6)

    def test_two_observations_match_joint_gaussian_oracle(self):
        p = make_params()
        times, ys = [1, 3], [[2.0], [1.0]]
        got = log_marginal_likelihood(times, ys, p)
        want = lgssm_log_marginal(times, ys, p)
        assert got == pytest.approx(want, abs=1e-10)

    def test_factorizes_when_split_and_chained(self):
        p = make_params()
        times, ys = [1, 2, 4, 5, 9], [[0.3], [0.9], [2.0], [1.7], [4.0]]
        full = log_marginal_likelihood(times, ys, p)
        head = log_marginal_likelihood(times[:2], ys[:2], p)
        steps = filter_pass(times[:2], ys[:2], p)
        Fg, Qg = p.transition(times[2] - times[1])
        m = Fg @ steps[-1].filtered.mean
        P = Fg @ steps[-1].filtered.cov @ Fg.T + Qg
        cont = make_params(mu0=m, Sigma0=P)
        tail = log_marginal_likelihood(times[2:], ys[2:], cont)
        assert head + tail == pytest.approx(full, abs=1e-10)

    def test_vector_state_matches_oracle(self, params_2d):
        times, ys = [1, 2, 5], [[0.4], [1.1], [4.0]]
        got = log_marginal_likelihood(times, ys, params_2d)
        want = lgssm_log_marginal(times, ys, params_2d)
        assert got == pytest.approx(want, abs=1e-9)


class TestSmootherMarginals:
    def test_single_observation_equals_filtered(self):
        p = make_params()
        steps = filter_pass([1], [[2.0]], p)
        sm = smoother_marginals(steps, p)
        np.testing.assert_allclose(sm[0].mean, steps[0].filtered.mean)
        np.testing.assert_allclose(sm[0].cov, steps[0].filtered.cov)

    def test_no_process_noise_collapses_to_shared_posterior(self):
        # Q=0, F=1: one constant latent; every smoothed mean is the same
        # precision-weighted average of the observations.
        p = make_params(Q=[[0.0]])
        ys = [0.5, 1.5, 1.0]
        steps = filter_pass([1, 2, 3], [[v] for v in ys], p)
        sm = smoother_marginals(steps, p)
        prec = 1.0 / 100.0 + 3.0 / 1.0
        want = (sum(ys) / 1.0) / prec
        for b in sm:
            assert b.mean[0] == pytest.approx(want, abs=1e-10)

    def test_three_point_case_matches_conditioning_oracle(self):
        p = make_params()
        times, ys = [1, 2, 4], [[0.0], [1.2], [0.4]]
        steps = filter_pass(times, ys, p)
        sm = smoother_marginals(steps, p)
        mean_post, cov_post = lgssm_posterior(times, ys, p)
        for i, b in enumerate(sm):
            assert b.mean[0] == pytest.approx(mean_post[i], abs=1e-10)
            assert b.cov[0, 0] == pytest.approx(cov_post[i, i], abs=1e-10)

    def test_vector_state_matches_conditioning_oracle(self, params_2d):
        times, ys = [1, 3, 4, 8], [[0.0], [2.0], [2.5], [7.0]]
        steps = filter_pass(times, ys, params_2d)
        sm = smoother_marginals(steps, params_2d)
        mean_post, cov_post = lgssm_posterior(times, ys, params_2d)
        for i, b in enumerate(sm):
            np.testing.assert_allclose(b.mean, mean_post[2 * i:2 * i + 2], atol=1e-9)
            np.testing.assert_allclose(
                b.cov, cov_post[2 * i:2 * i + 2, 2 * i:2 * i + 2], atol=1e-9
            )


class TestBackwardSample:
    def test_single_time_monte_carlo_mean(self, rng):
        p = make_params()
        steps = filter_pass([1], [[2.0]], p)
        draws = backward_sample(steps, p, rng, size=100_000)
        target_mean = 200.0 / 101.0
        target_sd = math.sqrt(100.0 / 101.0)
        se = target_sd / math.sqrt(100_000)
        assert abs(float(draws[:, 0, 0].mean()) - target_mean) < 3 * se

    def test_no_process_noise_collapses_to_deterministic_line(self, rng):
        # Q=0, F=1: conditioned on the final state, every earlier state is the
        # same value exactly (zero conditional covariance, no jitter).
        p = make_params(Q=[[0.0]])
        steps = filter_pass([1, 2, 3], [[0.5], [1.5], [1.0]], p)
        draw = backward_sample(steps, p, rng)
        assert draw[0, 0] == draw[1, 0] == draw[2, 0]
        # with a near-noiseless observation the draw pins to the smoother mean
        p_exact = make_params(Q=[[0.0]], R=[[1e-12]])
        steps = filter_pass([1, 2, 3], [[1.0], [1.0], [1.0]], p_exact)
        sm = smoother_marginals(steps, p_exact)
        draw = backward_sample(steps, p_exact, rng)
        np.testing.assert_allclose(draw[:, 0], [b.mean[0] for b in sm], atol=1e-5)

    def test_two_time_joint_covariance_matches_oracle(self, rng):
        p = make_params()
        times, ys = [1, 3], [[0.0], [2.0]]
        steps = filter_pass(times, ys, p)
        draws = backward_sample(steps, p, rng, size=200_000)[:, :, 0]
        _, cov_post = lgssm_posterior(times, ys, p)
        emp = np.cov(draws.T)
        # Monte Carlo error on covariance entries ~ cov/sqrt(n)
        np.testing.assert_allclose(emp, cov_post, atol=5 * np.max(cov_post) / math.sqrt(200_000))

    def test_draw_marginals_match_smoother(self, rng):
        # smaller version of the acceptance criterion (full size runs there)
        p = make_params(Q=[[0.8]], R=[[0.5]], Sigma0=[[10.0]])
        times = [1, 2, 4, 5, 6]
        ys = [[0.0], [0.5], [1.5], [2.0], [1.6]]
        steps = filter_pass(times, ys, p)
        sm = smoother_marginals(steps, p)
        n = 20_000
        draws = backward_sample(steps, p, rng, size=n)[:, :, 0]
        for j, belief in enumerate(sm):
            mu, var = belief.mean[0], belief.cov[0, 0]
            se_mean = math.sqrt(var / n)
            se_var = var * math.sqrt(2.0 / (n - 1))
            assert abs(draws[:, j].mean() - mu) < 5 * se_mean
            assert abs(draws[:, j].var(ddof=1) - var) < 5 * se_var


class TestHelpers:
    def test_gaussian_logpdf_zero_residual(self):
        assert gaussian_logpdf([2.0], [2.0], [[1.0]]) == pytest.approx(
            -0.5 * math.log(2 * math.pi)
        )

    def test_robust_cholesky_zero_matrix(self):
        L = robust_cholesky(np.zeros((2, 2)), allow_semidefinite=True)
        np.testing.assert_allclose(L, 0.0)

    def test_belief_shapes(self):
        b = GaussianBelief(1.0, 2.0)
        assert b.mean.shape == (1,)
        assert b.cov.shape == (1, 1)
