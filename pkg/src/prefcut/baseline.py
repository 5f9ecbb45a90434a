"""Bradley-Terry baseline learner.

A small ensemble of reward models trained by minimizing the logistic
(cross-entropy) preference loss over every accumulated preference, with a
temperature on the return gap. Data collection is shared with the cutting
learner; only the parameter update differs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .cutting import BatchHistory, CompiledHistory
from .rewards import InvalidInputError, trajectory_return
from .sampling import Ensemble


@dataclass
class BaselineConfig:
    n_models: int = 3
    alpha_base: float = 3.0
    step_size: float = 0.005
    steps: int = 150          # full-batch Adam steps per training round
    weight_decay: float = 0.001
    init_scale: float = 1.0

    def __post_init__(self):
        if self.n_models < 1:
            raise InvalidInputError("need at least one baseline model")
        if self.alpha_base <= 0:
            raise InvalidInputError("alpha_base must be positive")


def bt_preference_prob(model, params, seg0, seg1, alpha_base: float) -> float:
    """Probability that the second segment is preferred over the first."""
    j0 = trajectory_return(model, params, seg0)
    j1 = trajectory_return(model, params, seg1)
    return float(expit(alpha_base * (j1 - j0)))


class BTLearner:
    """Maintains the baseline model ensemble and its training loop."""

    def __init__(self, model, config: BaselineConfig, rng: np.random.Generator):
        self.model = model
        self.config = config
        self.thetas = np.stack([
            model.init_params(rng, scale=config.init_scale)
            for _ in range(config.n_models)])

    def ensemble(self) -> Ensemble:
        return Ensemble(members=self.thetas.copy())

    def train(self, history: BatchHistory) -> float:
        """Warm-started Adam on the logistic loss; returns the final mean loss."""
        if len(history) == 0:
            return float("nan")
        compiled = CompiledHistory.build(self.model, history)
        cfg = self.config
        thetas = self.thetas
        m1 = np.zeros_like(thetas)
        m2 = np.zeros_like(thetas)
        b1, b2, eps = 0.9, 0.999, 1e-8
        loss = np.full(len(thetas), np.nan)
        for t in range(1, cfg.steps + 1):
            loss, grad = compiled.pairwise_logistic_loss(thetas, cfg.alpha_base)
            g = grad + cfg.weight_decay * thetas
            m1 = b1 * m1 + (1 - b1) * g
            m2 = b2 * m2 + (1 - b2) * g ** 2
            mhat = m1 / (1 - b1 ** t)
            vhat = m2 / (1 - b2 ** t)
            thetas -= cfg.step_size * mhat / (np.sqrt(vhat) + eps)
        self.thetas = thetas
        return float(np.mean(loss))
