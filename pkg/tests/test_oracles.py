"""Simulated labelers: rational rule, flip injectors, irrational teachers."""

import numpy as np
import pytest

from prefcut import OracleSpec, Segment, SimulatedOracle, batch_flip_labels


def reward_is_first_state(states, actions):
    """Per-step true reward = first state component (fully controllable)."""
    return states[:, 0]


def seg_with_rewards(rewards):
    """Segment whose per-step true rewards equal the given sequence."""
    r = np.asarray(rewards, dtype=float)
    states = np.zeros((len(r) + 1, 2))
    states[:-1, 0] = r
    return Segment(states=states, actions=np.zeros((len(r), 1)))


def oracle(kind="rational", seed=0, **kw):
    return SimulatedOracle(OracleSpec(kind=kind, seed=seed, **kw),
                           reward_is_first_state)


class TestRational:
    def test_tie_goes_to_second_segment(self):
        o = oracle()
        seg = seg_with_rewards([1.0, 2.0])
        assert o.label(seg, seg)[0] == 1

    def test_higher_first_return_gives_zero(self):
        o = oracle()
        lab, truth = o.label(seg_with_rewards([5.0]), seg_with_rewards([3.0]))
        assert lab == 0 and truth == 0

    def test_scale_invariance_of_comparison(self):
        """Labels depend only on the ranking, not the reward scale."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            r0, r1 = rng.normal(0, 1, 5), rng.normal(0, 1, 5)
            base = oracle().rational_label(seg_with_rewards(r0),
                                           seg_with_rewards(r1))
            scaled = oracle().rational_label(seg_with_rewards(7.3 * r0),
                                             seg_with_rewards(7.3 * r1))
            assert base == scaled

    def test_never_violates_rational_rule(self):
        """Issued rational labels always make the true-gap nonnegative."""
        rng = np.random.default_rng(1)
        o = oracle()
        for _ in range(50):
            s0 = seg_with_rewards(rng.normal(0, 1, 4))
            s1 = seg_with_rewards(rng.normal(0, 1, 4))
            lab, _ = o.label(s0, s1)
            j0, j1 = o.true_return(s0), o.true_return(s1)
            assert (1 - 2 * lab) * (j0 - j1) >= 0


class TestBatchFlip:
    def test_rate_zero_is_identity(self):
        rng = np.random.default_rng(2)
        labels = [0, 1, 1, 0, 1]
        assert batch_flip_labels(labels, 0.0, rng) == labels

    def test_exact_flip_count(self):
        rng = np.random.default_rng(3)
        for rate, n, expected in [(0.2, 10, 2), (0.3, 10, 3), (0.1, 10, 1),
                                  (0.25, 8, 2), (0.15, 10, 2)]:
            labels = list(rng.integers(0, 2, n))
            flipped = batch_flip_labels(labels, rate, rng)
            assert sum(a != b for a, b in zip(labels, flipped)) == expected

    def test_rate_one_is_involution(self):
        rng = np.random.default_rng(4)
        labels = [0, 1, 0, 0, 1, 1]
        once = batch_flip_labels(labels, 1.0, rng)
        assert all(a != b for a, b in zip(labels, once))
        twice = batch_flip_labels(once, 1.0, rng)
        assert twice == labels

    def test_finalize_batch_hook(self):
        o = oracle(kind="batch-flip", rate=0.2)
        labels = [1] * 10
        out = o.finalize_batch(labels)
        assert sum(v == 0 for v in out) == 2


class TestStochastic:
    def test_equal_returns_split_evenly(self):
        o = oracle(kind="stoc", beta=10.0, seed=5)
        seg = seg_with_rewards([1.0, 1.0])
        draws = [o.stoc_label(seg, seg) for _ in range(20000)]
        assert np.mean(draws) == pytest.approx(0.5, abs=0.01)

    def test_saturation_for_large_gap(self):
        o = oracle(kind="stoc", beta=10.0, seed=6)
        lo, hi = seg_with_rewards([-50.0]), seg_with_rewards([50.0])
        assert all(o.stoc_label(lo, hi) == 1 for _ in range(100))

    def test_closed_form_probability(self):
        """beta=10, return gap 0.1 -> P(label 1) = 1 / (1 + e^-1)."""
        o = oracle(kind="stoc", beta=10.0, seed=7)
        s0, s1 = seg_with_rewards([0.0]), seg_with_rewards([0.1])
        freq = np.mean([o.stoc_label(s0, s1) for _ in range(100000)])
        assert freq == pytest.approx(1.0 / (1.0 + np.exp(-1.0)), abs=0.01)


class TestMistake:
    def test_epsilon_zero_is_rational(self):
        o = oracle(kind="mistake", epsilon=0.0, seed=8)
        s0, s1 = seg_with_rewards([2.0]), seg_with_rewards([1.0])
        assert all(o.mistake_label(s0, s1) == 0 for _ in range(50))

    def test_epsilon_one_always_flips(self):
        o = oracle(kind="mistake", epsilon=1.0, seed=9)
        s0, s1 = seg_with_rewards([2.0]), seg_with_rewards([1.0])
        assert all(o.mistake_label(s0, s1) == 1 for _ in range(50))

    def test_flip_frequency(self):
        o = oracle(kind="mistake", epsilon=0.2, seed=10)
        s0, s1 = seg_with_rewards([2.0]), seg_with_rewards([1.0])
        freq = np.mean([o.mistake_label(s0, s1) for _ in range(100000)])
        assert freq == pytest.approx(0.2, abs=0.01)


class TestMyopic:
    def test_gamma_one_equals_rational(self):
        o = oracle(kind="myopic", gamma_m=1.0, seed=11)
        rng = np.random.default_rng(12)
        for _ in range(30):
            s0 = seg_with_rewards(rng.normal(0, 1, 5))
            s1 = seg_with_rewards(rng.normal(0, 1, 5))
            assert o.myopic_label(s0, s1) == o.rational_label(s0, s1)

    def test_constant_segments_tie_to_one(self):
        o = oracle(kind="myopic", gamma_m=0.9)
        seg = seg_with_rewards([0.5, 0.5, 0.5])
        assert o.myopic_label(seg, seg) == 1

    def test_recency_weighting_hand_case(self):
        """(1,0) vs (0,1) with discount 0.5: weights (0.5, 1) -> prefers
        the segment whose reward arrives last."""
        o = oracle(kind="myopic", gamma_m=0.5)
        early = seg_with_rewards([1.0, 0.0])
        late = seg_with_rewards([0.0, 1.0])
        assert o.discounted_return(early, 0.5) == pytest.approx(0.5)
        assert o.discounted_return(late, 0.5) == pytest.approx(1.0)
        assert o.myopic_label(early, late) == 1

    def test_dispatch_through_label(self):
        o = oracle(kind="myopic", gamma_m=0.5)
        lab, truth = o.label(seg_with_rewards([1.0, 0.0]),
                             seg_with_rewards([0.0, 1.0]))
        assert lab == 1 and truth in (0, 1)


class TestDeterminism:
    def test_same_seed_same_stream(self):
        a = oracle(kind="stoc", beta=2.0, seed=42)
        b = oracle(kind="stoc", beta=2.0, seed=42)
        s0, s1 = seg_with_rewards([0.0]), seg_with_rewards([0.05])
        seq_a = [a.label(s0, s1)[0] for _ in range(200)]
        seq_b = [b.label(s0, s1)[0] for _ in range(200)]
        assert seq_a == seq_b
