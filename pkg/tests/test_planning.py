"""MPPI planning, ensemble-mean reward, and trajectory generation."""

import numpy as np
import pytest

from prefcut import (Cartpole, Ensemble, EnsembleReward, EnvSpec,
                     GroundTruthReward, LinearRewardModel, MLPRewardModel,
                     PlannerConfig, PointMass, ensemble_reward,
                     generate_trajectory, mppi_plan, random_policy_trajectory)
from prefcut.planning import shift_nominal, softmax_weights


def pm_features(states, actions):
    return np.stack([-states[:, 0] ** 2, -states[:, 1] ** 2,
                     -actions[:, 0] ** 2], axis=1)


class TestSoftmaxWeights:
    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = softmax_weights(rng.normal(0, 10, 32), lam=0.1)
            assert w.sum() == pytest.approx(1.0)
            assert np.all(w >= 0)

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        r = rng.normal(0, 5, 16)
        np.testing.assert_allclose(softmax_weights(r, 0.5),
                                   softmax_weights(r + 123.4, 0.5), rtol=1e-12)

    def test_extreme_returns_stay_finite(self):
        w = softmax_weights(np.array([1e6, -1e6, 0.0]), lam=0.01)
        assert np.isfinite(w).all() and w[0] == pytest.approx(1.0)


class TestEnsembleReward:
    def test_identical_members_equal_single(self):
        env = PointMass()
        model = LinearRewardModel(env.features, 3)
        theta = np.array([1.0, 0.5, 0.25])
        ens = Ensemble(members=np.tile(theta, (5, 1)))
        s, a = np.array([0.7, -0.2]), np.array([0.1])
        assert ensemble_reward(model, ens, s, a) == pytest.approx(
            model.reward(theta, s, a))

    def test_two_point_mean(self):
        def unit_feature(states, actions):
            return np.ones((len(states), 1))
        model = LinearRewardModel(unit_feature, 1)
        ens = Ensemble(members=np.array([[0.2], [0.6]]))
        val = ensemble_reward(model, ens, np.zeros(1), np.zeros(1))
        assert val == pytest.approx(0.4)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        env = Cartpole()
        model = MLPRewardModel(input_dim=6, hidden=(8, 8),
                               input_fn=env.model_input)
        members = np.stack([model.init_params(rng) for _ in range(16)])
        ens = Ensemble(members=members)
        s, a = env.reset(rng), np.array([0.3])
        expected = np.mean([model.reward(m, s, a) for m in members])
        assert ensemble_reward(model, ens, s, a) == pytest.approx(expected)

    def test_mean_commutes_with_linear_models_only(self):
        """mean of rewards == reward at mean params iff the model is linear."""
        rng = np.random.default_rng(3)
        env = PointMass()
        lin = LinearRewardModel(env.features, 3)
        members = rng.standard_normal((8, 3))
        s, a = np.array([0.5, 0.3]), np.array([0.2])
        mean_of = ensemble_reward(lin, Ensemble(members=members), s, a)
        of_mean = lin.reward(members.mean(axis=0), s, a)
        assert mean_of == pytest.approx(of_mean, rel=1e-12)

        mlp = MLPRewardModel(input_dim=3, hidden=(8,), squash=True,
                             input_fn=env.model_input)
        members = np.stack([3 * mlp.init_params(rng) for _ in range(8)])
        mean_of = ensemble_reward(mlp, Ensemble(members=members), s, a)
        of_mean = mlp.reward(members.mean(axis=0), s, a)
        assert mean_of != pytest.approx(of_mean, rel=1e-6)


class TestMppiPlan:
    def _env(self):
        return PointMass(EnvSpec(kind="pointmass", dt=0.1, init_noise=0.0))

    def test_single_sample_returns_its_perturbation(self):
        env = self._env()
        cfg = PlannerConfig(num_samples=1, horizon=5, lam=0.1, std=0.5)
        rng = np.random.default_rng(4)
        probe = np.random.default_rng(4)
        nominal = np.zeros((5, 1))
        expected = np.clip(nominal + probe.normal(0, 0.5, (1, 5, 1))[0],
                           env.action_low, env.action_high)
        new_nominal, action = mppi_plan(env, GroundTruthReward(env), cfg,
                                        np.array([1.0, 0.0]), nominal, rng)
        np.testing.assert_allclose(new_nominal, expected, rtol=1e-12)
        np.testing.assert_allclose(action, expected[0], rtol=1e-12)

    def test_large_lambda_approaches_unweighted_mean(self):
        env = self._env()
        state = np.array([1.0, 0.0])
        nominal = np.zeros((4, 1))
        out = {}
        for lam in (1e6, 1e7):
            cfg = PlannerConfig(num_samples=64, horizon=4, lam=lam, std=0.5)
            rng = np.random.default_rng(5)
            out[lam], _ = mppi_plan(env, GroundTruthReward(env), cfg, state,
                                    nominal, rng)
        probe = np.random.default_rng(5)
        noise = probe.normal(0, 0.5, (64, 4, 1))
        mean_plan = np.clip(nominal[None] + noise, -1, 1).mean(axis=0)
        np.testing.assert_allclose(out[1e7], mean_plan, atol=1e-4)

    def test_deterministic_given_seed(self):
        env = self._env()
        cfg = PlannerConfig(num_samples=32, horizon=6, lam=0.05, std=1.0)
        a = mppi_plan(env, GroundTruthReward(env), cfg, np.array([0.5, 0.0]),
                      np.zeros((6, 1)), np.random.default_rng(6))
        b = mppi_plan(env, GroundTruthReward(env), cfg, np.array([0.5, 0.0]),
                      np.zeros((6, 1)), np.random.default_rng(6))
        np.testing.assert_array_equal(a[0], b[0])

    def test_shift_nominal(self):
        nominal = np.arange(8.0).reshape(4, 2)
        out = shift_nominal(nominal)
        np.testing.assert_array_equal(out[:-1], nominal[1:])
        np.testing.assert_array_equal(out[-1], 0.0)


class TestGenerateTrajectory:
    def test_random_policy_within_bounds(self):
        env = PointMass()
        traj = random_policy_trajectory(env, 50, np.random.default_rng(7))
        assert len(traj) == 50
        assert np.all(traj.actions >= -1.0) and np.all(traj.actions <= 1.0)

    def test_exploration_disabled_is_pure_planning(self):
        env = PointMass(EnvSpec(kind="pointmass", dt=0.1, init_noise=0.0))
        cfg = PlannerConfig(num_samples=16, horizon=5, lam=0.05, std=0.5,
                            explore=False)
        a = generate_trajectory(env, GroundTruthReward(env), cfg, 10, 0,
                                np.random.default_rng(8))
        b = generate_trajectory(env, GroundTruthReward(env), cfg, 10, 0,
                                np.random.default_rng(8))
        np.testing.assert_array_equal(a.actions, b.actions)

    def test_exploration_decay_arithmetic(self):
        cfg = PlannerConfig(num_samples=4, horizon=3, std=1.0, explore=True,
                            explore_decay=0.9)
        scale_at_10 = (cfg.std if cfg.explore_scale is None
                       else cfg.explore_scale) * cfg.explore_decay ** 10
        assert scale_at_10 == pytest.approx(0.34867844, rel=1e-6)

    def test_planner_beats_random_policy_on_regulation(self):
        """Receding-horizon planning under the true reward must outperform
        uniform random actions (averaged over seeds)."""
        env = PointMass(EnvSpec(kind="pointmass", dt=0.1, init_noise=0.5))
        cfg = PlannerConfig(num_samples=32, horizon=10, lam=0.05, std=0.5,
                            explore=False)

        def score(traj):
            return float(np.sum(env.ground_truth_reward(traj.states[:-1],
                                                        traj.actions)))
        planned, random_ = [], []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            planned.append(score(generate_trajectory(
                env, GroundTruthReward(env), cfg, 40, 0, rng)))
            random_.append(score(random_policy_trajectory(
                env, 40, np.random.default_rng(seed))))
        assert np.mean(planned) > np.mean(random_)
