"""Bradley-Terry baseline learner."""

import numpy as np
import pytest

from prefcut import (BaselineConfig, BatchHistory, BTLearner,
                     LinearRewardModel, MLPRewardModel, PreferenceBatch,
                     PreferenceRecord, Segment, bt_preference_prob)


def first_state_features(states, actions):
    return states[:, :1]


def seg_with_value(v, length=2):
    states = np.zeros((length + 1, 1))
    states[0, 0] = v
    return Segment(states=states, actions=np.zeros((length, 1)))


class TestPreferenceProb:
    def test_symmetry(self):
        model = LinearRewardModel(first_state_features, 1)
        theta = np.array([1.0])
        a, b = seg_with_value(2.0), seg_with_value(-1.0)
        p_ab = bt_preference_prob(model, theta, a, b, alpha_base=3.0)
        p_ba = bt_preference_prob(model, theta, b, a, alpha_base=3.0)
        assert p_ab + p_ba == pytest.approx(1.0)

    def test_equal_returns_half(self):
        model = LinearRewardModel(first_state_features, 1)
        seg = seg_with_value(1.0)
        assert bt_preference_prob(model, np.array([2.0]), seg, seg, 3.0) \
            == pytest.approx(0.5)


class TestTraining:
    def test_zero_preferences_leave_models_at_initialization(self):
        rng = np.random.default_rng(0)
        model = MLPRewardModel(input_dim=2, hidden=(8,))
        learner = BTLearner(model, BaselineConfig(), rng)
        before = learner.thetas.copy()
        loss = learner.train(BatchHistory())
        assert np.isnan(loss)
        np.testing.assert_array_equal(learner.thetas, before)

    def test_single_large_gap_preference_learned_confidently(self):
        """After training on one clear preference the predicted probability
        of the labeled winner exceeds 0.9."""
        rng = np.random.default_rng(1)
        model = LinearRewardModel(first_state_features, 1)
        learner = BTLearner(model, BaselineConfig(alpha_base=10.0, steps=300),
                            rng)
        s0, s1 = seg_with_value(3.0), seg_with_value(-3.0)
        batch = PreferenceBatch(records=[PreferenceRecord(
            seg0=s0, seg1=s1, label=0, query_id=0)], batch_index=0)
        hist = BatchHistory()
        hist.append(batch)
        learner.train(hist)
        for theta in learner.thetas:
            p_winner = 1.0 - bt_preference_prob(model, theta, s0, s1, 10.0)
            assert p_winner > 0.9

    def test_loss_decreases_on_consistent_data(self):
        rng = np.random.default_rng(2)
        model = MLPRewardModel(input_dim=2, hidden=(8,), squash=True,
                               input_fn=lambda s, a: np.concatenate([s, a], 1))
        cfg = BaselineConfig(alpha_base=3.0, steps=25)
        learner = BTLearner(model, cfg, rng)
        hist = BatchHistory()
        records = []
        for j in range(12):
            v0, v1 = rng.normal(0, 2, 2)
            records.append(PreferenceRecord(
                seg0=seg_with_value(v0), seg1=seg_with_value(v1),
                label=1 if v0 <= v1 else 0, query_id=j))
        hist.append(PreferenceBatch(records=records, batch_index=0))
        first = learner.train(hist)
        for _ in range(5):
            last = learner.train(hist)
        assert last < first
