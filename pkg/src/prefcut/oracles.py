"""Simulated label providers: the rational teacher, controlled false-label
injectors, and the irrational teacher variants (stochastic, mistake-prone,
myopic).

Every simulated oracle ranks segment pairs with a ground-truth per-step
reward function and reports the pre-corruption rational label alongside the
issued one so runs can be audited after the fact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .rewards import InvalidInputError, Trajectory


@dataclass
class OracleSpec:
    """Oracle kind plus whatever corruption parameters that kind uses."""

    kind: str = "rational"
    rate: float = 0.0       # flip fraction for batch-flip / bernoulli-flip
    beta: float = 10.0      # stochastic teacher temperature
    epsilon: float = 0.2    # mistake teacher flip probability
    gamma_m: float = 0.98   # myopic teacher discount
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise InvalidInputError("rate must be in [0, 1]")
        if self.beta <= 0:
            raise InvalidInputError("beta must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidInputError("epsilon must be in [0, 1]")
        if not 0.0 < self.gamma_m <= 1.0:
            raise InvalidInputError("gamma_m must be in (0, 1]")


SIMULATED_KINDS = ("rational", "batch-flip", "bernoulli-flip", "stoc",
                   "mistake", "myopic")


def batch_flip_labels(true_labels, rate: float, rng: np.random.Generator):
    """Negate exactly round(rate * N) labels at uniform positions."""
    labels = list(true_labels)
    if not 0.0 <= rate <= 1.0:
        raise InvalidInputError("rate must be in [0, 1]")
    n_flips = int(np.floor(rate * len(labels) + 0.5))
    for idx in rng.choice(len(labels), size=n_flips, replace=False):
        labels[idx] = 1 - labels[idx]
    return labels


class SimulatedOracle:
    """Computer-program labeler backed by a ground-truth step reward.

    true_reward_fn(states (n, ds), actions (n, da)) -> per-step rewards (n,)
    """

    source = "simulated"

    def __init__(self, spec: OracleSpec, true_reward_fn,
                 rng: np.random.Generator | None = None):
        if spec.kind not in SIMULATED_KINDS:
            raise InvalidInputError(f"not a simulated oracle kind: {spec.kind!r}")
        self.spec = spec
        self.true_reward_fn = true_reward_fn
        self.rng = rng if rng is not None else np.random.default_rng(spec.seed)

    def true_return(self, seg: Trajectory) -> float:
        return float(np.sum(self.true_reward_fn(seg.states[:-1], seg.actions)))

    def discounted_return(self, seg: Trajectory, gamma_m: float) -> float:
        r = np.asarray(self.true_reward_fn(seg.states[:-1], seg.actions))
        weights = gamma_m ** np.arange(len(r) - 1, -1, -1, dtype=np.float64)
        return float(np.sum(weights * r))

    def rational_label(self, seg0: Trajectory, seg1: Trajectory) -> int:
        """1 when the second segment is at least as good, else 0 (ties -> 1)."""
        return 1 if self.true_return(seg0) <= self.true_return(seg1) else 0

    def stoc_label(self, seg0: Trajectory, seg1: Trajectory) -> int:
        p1 = expit(self.spec.beta * (self.true_return(seg1) - self.true_return(seg0)))
        return 1 if self.rng.random() < p1 else 0

    def mistake_label(self, seg0: Trajectory, seg1: Trajectory) -> int:
        y = self.rational_label(seg0, seg1)
        if self.rng.random() < self.spec.epsilon:
            y = 1 - y
        return y

    def myopic_label(self, seg0: Trajectory, seg1: Trajectory) -> int:
        g = self.spec.gamma_m
        d0 = self.discounted_return(seg0, g)
        d1 = self.discounted_return(seg1, g)
        return 1 if d0 <= d1 else 0

    def label(self, seg0: Trajectory, seg1: Trajectory, query_id: int | None = None):
        """Issue (label, rational_label) for one query."""
        truth = self.rational_label(seg0, seg1)
        kind = self.spec.kind
        if kind in ("rational", "batch-flip"):
            issued = truth
        elif kind == "bernoulli-flip":
            issued = 1 - truth if self.rng.random() < self.spec.rate else truth
        elif kind == "stoc":
            issued = self.stoc_label(seg0, seg1)
        elif kind == "mistake":
            issued = self.mistake_label(seg0, seg1)
        else:  # myopic
            issued = self.myopic_label(seg0, seg1)
        return issued, truth

    def finalize_batch(self, labels):
        """Batch-level corruption hook; exact-count flipping happens here."""
        if self.spec.kind == "batch-flip":
            return batch_flip_labels(labels, self.spec.rate, self.rng)
        return list(labels)
