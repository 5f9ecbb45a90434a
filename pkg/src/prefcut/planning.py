"""Sampling-based model predictive control for trajectory generation.

MPPI: sample noisy action sequences around a nominal plan, roll every one
through the dynamics, weight by softmax of total reward, and execute the
first action of the weighted average. The reward driving planning is the
ensemble mean; decaying exploration noise perturbs roughly half of the
executed actions early in learning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rewards import InvalidInputError, Trajectory
from .sampling import Ensemble


class PlanningError(RuntimeError):
    """Planning could not produce a usable action."""


@dataclass
class PlannerConfig:
    num_samples: int = 256
    horizon: int = 20
    lam: float = 0.01
    std: float = 1.0
    explore: bool = True
    explore_scale: float | None = None    # default: std
    explore_decay: float = 0.9
    explore_prob: float = 0.5

    def __post_init__(self):
        if self.num_samples < 1 or self.horizon < 1:
            raise InvalidInputError("need num_samples >= 1 and horizon >= 1")
        if self.lam <= 0 or self.std <= 0:
            raise InvalidInputError("lambda and std must be positive")


def ensemble_reward(model, ensemble: Ensemble, state, action) -> float:
    """Arithmetic mean of member rewards at one (state, action)."""
    X = model.inputs(state, action)
    rewards, _ = model.forward(ensemble.members, X)
    return float(rewards.mean(axis=0)[0])


class EnsembleReward:
    """Batch adapter: mean member reward over rows of raw (state, action)."""

    def __init__(self, model, ensemble: Ensemble):
        if len(ensemble) == 0:
            raise InvalidInputError("empty ensemble")
        self.model = model
        self.ensemble = ensemble

    def __call__(self, states, actions) -> np.ndarray:
        X = self.model.inputs(states, actions)
        rewards, _ = self.model.forward(self.ensemble.members, X)
        return rewards.mean(axis=0)


class GroundTruthReward:
    """Batch adapter around an environment's true reward (the oracle planner)."""

    def __init__(self, env):
        self.env = env

    def __call__(self, states, actions) -> np.ndarray:
        return np.atleast_1d(self.env.ground_truth_reward(states, actions))


def softmax_weights(returns: np.ndarray, lam: float) -> np.ndarray:
    """exp((R - max R) / lam), normalized; max-subtraction keeps this finite."""
    shifted = (returns - returns.max()) / lam
    w = np.exp(shifted)
    return w / w.sum()


def mppi_plan(env, reward_fn, config: PlannerConfig, state: np.ndarray,
              nominal: np.ndarray, rng: np.random.Generator):
    """One planning step: returns (new nominal sequence, executed action)."""
    nominal = np.asarray(nominal, dtype=np.float64)
    if nominal.shape != (config.horizon, env.action_dim):
        raise InvalidInputError(
            f"nominal plan must be ({config.horizon}, {env.action_dim})")
    K, H = config.num_samples, config.horizon
    noise = rng.normal(0.0, config.std, size=(K, H, env.action_dim))
    plans = np.clip(nominal[None, :, :] + noise, env.action_low, env.action_high)
    states = np.broadcast_to(state, (K, env.state_dim)).copy()
    total = np.zeros(K)
    try:
        for h in range(H):
            total += reward_fn(states, plans[:, h])
            states = env.step(states, plans[:, h])
    except InvalidInputError as exc:
        raise PlanningError(f"rollout failed at the dynamics: {exc}") from exc
    if not np.isfinite(total).any():
        raise PlanningError("every rollout return is non-finite")
    w = softmax_weights(np.where(np.isfinite(total), total, -np.inf), config.lam)
    new_nominal = np.einsum("k,khj->hj", w, plans)
    new_nominal = np.clip(new_nominal, env.action_low, env.action_high)
    return new_nominal, new_nominal[0].copy()


def shift_nominal(nominal: np.ndarray) -> np.ndarray:
    """Receding-horizon warm start: drop the executed step, pad with zeros."""
    out = np.zeros_like(nominal)
    out[:-1] = nominal[1:]
    return out


def random_policy_trajectory(env, ep_len: int, rng: np.random.Generator) -> Trajectory:
    """Bootstrap behavior: actions uniform within the action box."""
    state = env.reset(rng)
    states, actions = [state], []
    for _ in range(ep_len):
        a = rng.uniform(env.action_low, env.action_high)
        actions.append(a)
        state = env.step(state, a)
        states.append(state)
    return Trajectory(states=np.stack(states), actions=np.stack(actions))


def generate_trajectory(env, reward_fn, config: PlannerConfig, ep_len: int,
                        iteration_index: int, rng: np.random.Generator,
                        initial_state=None) -> Trajectory:
    """Full episode of receding-horizon MPPI under the given reward.

    With exploration enabled each executed action is perturbed with
    probability explore_prob by noise whose scale decays geometrically in
    the learning iteration.
    """
    state = env.reset(rng) if initial_state is None else np.asarray(initial_state)
    nominal = np.zeros((config.horizon, env.action_dim))
    scale = 0.0
    if config.explore:
        base = config.std if config.explore_scale is None else config.explore_scale
        scale = base * config.explore_decay ** iteration_index
    states, actions = [state], []
    for _ in range(ep_len):
        nominal, action = mppi_plan(env, reward_fn, config, state, nominal, rng)
        if scale > 0.0 and rng.random() < config.explore_prob:
            action = action + rng.normal(0.0, scale, size=action.shape)
        action = np.clip(action, env.action_low, env.action_high)
        actions.append(action)
        state = env.step(state, action)
        states.append(state)
        nominal = shift_nominal(nominal)
    return Trajectory(states=np.stack(states), actions=np.stack(actions))
