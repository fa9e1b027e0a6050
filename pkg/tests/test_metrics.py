"""Distortion and perception metrics against hand values and closed forms."""

import numpy as np
import pytest

from bridgelab.metrics import (
    energy_distance,
    gaussian_w2,
    mse,
    per_step_errors,
    perception_distance,
    si_sdr,
)
from bridgelab.sampler import SamplerConfig, sample_trajectory
from bridgelab.schedule import NoiseSchedule
from bridgelab.tasks import MixtureTask


class TestSiSdr:
    def test_perfect_estimate_hits_ceiling(self):
        x = np.array([1.0, -2.0, 0.5])
        assert si_sdr(x, x) == 60.0

    def test_scale_invariance(self):
        x = np.array([1.0, -2.0, 0.5])
        assert si_sdr(2.0 * x, x) == si_sdr(x, x)
        noisy = x + np.array([0.1, -0.2, 0.05])
        assert si_sdr(3.0 * noisy, x) == pytest.approx(si_sdr(noisy, x), abs=1e-12)

    def test_hand_value(self):
        # reference (1,0), estimate (1,1): s = (1,0), e = (0,1) -> 0 dB
        assert si_sdr(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(0.0)

    def test_orthogonal_estimate(self):
        assert si_sdr(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == float("-inf")

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            si_sdr(np.array([1.0]), np.array([0.0]))

    def test_monotone_in_noise_level(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(64)
        noise = rng.standard_normal(64)
        values = [si_sdr(x + level * noise, x) for level in (0.01, 0.1, 1.0)]
        assert values[0] > values[1] > values[2]

    def test_configurable_ceiling(self):
        x = np.array([1.0, 2.0])
        assert si_sdr(x, x, ceiling_db=80.0) == 80.0


class TestGaussianW2:
    def test_unit_gaussians_shifted_mean(self):
        w2, flag = gaussian_w2(np.zeros(1), np.eye(1), np.ones(1), np.eye(1))
        assert w2 == pytest.approx(1.0, abs=1e-9)
        assert not flag

    def test_same_distribution_zero(self):
        rng = np.random.default_rng(1)
        q = rng.standard_normal((3, 3))
        cov = q @ q.T + np.eye(3)
        mu = rng.standard_normal(3)
        w2, _ = gaussian_w2(mu, cov, mu, cov)
        assert w2 == pytest.approx(0.0, abs=1e-7)

    def test_degenerate_covariance_flagged(self):
        w2, flag = gaussian_w2(np.zeros(2), np.zeros((2, 2)), np.ones(2), np.eye(2))
        assert flag
        assert np.isfinite(w2)


class TestPerceptionDistance:
    def test_identical_sets_are_zero(self):
        rng = np.random.default_rng(2)
        samples = rng.standard_normal((10_000, 1))
        w2, energy = perception_distance(samples, samples)
        assert w2 < 1e-3
        assert energy == pytest.approx(0.0, abs=1e-9)

    def test_identical_sets_are_zero_multivariate(self):
        rng = np.random.default_rng(2)
        samples = rng.standard_normal((2_000, 2))
        w2, energy = perception_distance(samples, samples)
        assert w2 < 1e-3
        assert energy == pytest.approx(0.0, abs=1e-12)

    def test_shifted_scalar_gaussians(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((40_000, 1))
        b = rng.standard_normal((40_000, 1)) + 1.0
        w2, _ = perception_distance(a, b)
        assert w2 == pytest.approx(1.0, abs=0.02)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((500, 2))
        b = 0.5 * rng.standard_normal((600, 2)) + 0.3
        d_ab = perception_distance(a, b)
        d_ba = perception_distance(b, a)
        assert d_ab[0] == pytest.approx(d_ba[0], abs=1e-9)
        assert d_ab[1] == pytest.approx(d_ba[1], abs=1e-9)

    def test_posterior_mean_outputs_are_less_clean_than_posterior_samples(self):
        # The posterior-mean estimator collapses the bimodal structure, so
        # its outputs sit farther from the clean distribution than exact
        # posterior samples do; the energy distance resolves this.
        task = MixtureTask()
        rng = np.random.default_rng(5)
        xs, ys, x_stars = task.sample_pairs(4000, rng)
        clean = task.clean_sampler(4000, rng)

        # exact posterior sampler: component by responsibility, then the
        # per-component Gaussian posterior
        c = np.asarray(task.centers)
        total_var = task.s2 + task.noise_var
        y = ys[:, 0]
        logits = -0.5 * (y[:, None] - c) ** 2 / total_var + np.log(task.weights)
        logits -= logits.max(axis=1, keepdims=True)
        resp = np.exp(logits)
        resp /= resp.sum(axis=1, keepdims=True)
        comp = (rng.random(len(y)) > resp[:, 0]).astype(int)
        post_var = task.s2 * task.noise_var / total_var
        means = (c[comp] * task.noise_var + y * task.s2) / total_var
        posterior_draws = (means + np.sqrt(post_var) * rng.standard_normal(len(y)))[:, None]

        _, energy_mean = perception_distance(x_stars, clean)
        _, energy_post = perception_distance(posterior_draws, clean)
        assert energy_mean > energy_post

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            perception_distance(np.zeros((5, 2)), np.zeros((5, 3)))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            perception_distance(np.zeros((0, 2)), np.zeros((5, 2)))


class TestEnergyDistance:
    def test_zero_for_identical(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((300, 2))
        assert energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_positive_for_disjoint(self):
        a = np.zeros((100, 1))
        b = np.ones((100, 1))
        assert energy_distance(a, b) > 0.5

    def test_chunking_matches_direct(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((700, 2))
        b = rng.standard_normal((650, 2))
        direct = (
            2 * np.mean(np.linalg.norm(a[:, None] - b[None, :], axis=2))
            - np.mean(np.linalg.norm(a[:, None] - a[None, :], axis=2))
            - np.mean(np.linalg.norm(b[:, None] - b[None, :], axis=2))
        )
        assert energy_distance(a, b) == pytest.approx(direct, abs=1e-10)

    def test_sorted_scalar_path_matches_direct(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((400, 1))
        b = rng.standard_normal((350, 1)) + 0.4
        direct = (
            2 * np.mean(np.abs(a[:, None, 0] - b[None, :, 0]))
            - np.mean(np.abs(a[:, None, 0] - a[None, :, 0]))
            - np.mean(np.abs(b[:, None, 0] - b[None, :, 0]))
        )
        assert energy_distance(a, b) == pytest.approx(direct, abs=1e-12)


class TestPerStepErrors:
    def test_oracle_predictor_all_zero(self):
        sch = NoiseSchedule()
        x0 = np.array([0.4])
        predictor = lambda s, t, c: np.broadcast_to(x0, s.shape)
        traj = sample_trajectory(
            predictor, np.array([1.0]), np.array([1.0]), SamplerConfig(n_steps=10), sch,
            rng=np.random.default_rng(0),
        )
        assert per_step_errors(traj, x0) == [0.0] * 10

    def test_constant_predictor_constant_error(self):
        sch = NoiseSchedule()
        x_star = np.array([0.5, -0.5])
        x_true = np.array([1.0, 1.0])
        predictor = lambda s, t, c: np.broadcast_to(x_star, s.shape)
        traj = sample_trajectory(
            predictor, np.zeros(2), np.zeros(2), SamplerConfig(n_steps=5), sch,
            rng=np.random.default_rng(0),
        )
        expected = float(np.sum((x_star - x_true) ** 2))
        assert per_step_errors(traj, x_true) == [pytest.approx(expected)] * 5

    def test_requires_predictions(self):
        from bridgelab.sampler import Trajectory

        with pytest.raises(ValueError):
            per_step_errors(Trajectory(), np.zeros(1))


class TestMse:
    def test_hand_value(self):
        assert mse(np.array([1.0, 2.0]), np.array([0.0, 0.0])) == pytest.approx(2.5)
