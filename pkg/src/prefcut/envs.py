"""Desk-scale environments with analytic dynamics and ground-truth rewards.

PointMass is a 1-D double integrator whose ground-truth reward is exactly
linear in a fixed feature map, so a linear reward model can represent the
true parameters with zero approximation error. Cartpole is the classic
cart-and-rod swing-up with a product-form shaped reward; only its reward
shape matters to the learning loop, the physical constants are ordinary
textbook values.

All dynamics are value-semantic and vectorized: `step` maps a batch of
states and actions to a batch of successor states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rewards import InvalidInputError


@dataclass
class EnvSpec:
    """Serializable environment configuration."""

    kind: str = "pointmass"
    dt: float = 0.1
    substeps: int = 1
    init_noise: float = 0.01
    ep_len: int = 60
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")
        if self.substeps < 1:
            raise InvalidInputError("substeps must be >= 1")


def _rows(x, width):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != width:
        raise InvalidInputError(f"expected row width {width}, got {x.shape[1]}")
    return x, squeeze


class PointMass:
    """Double integrator on a line; reward penalizes position, speed, effort.

    state  = (x, v), action = force command clamped to [-1, 1]
    reward = dot(true_params, (-x^2, -v^2, -a^2))
    """

    kind = "pointmass"
    state_dim = 2
    action_dim = 1
    obs_dim = 2
    feature_dim = 3
    feature_id = "pointmass-quadratic"

    def __init__(self, spec: EnvSpec | None = None):
        self.spec = spec or EnvSpec(kind="pointmass")
        c = self.spec.constants
        self.mass = float(c.get("mass", 1.0))
        self.true_params = np.asarray(
            c.get("true_params", (1.0, 0.5, 0.25)), dtype=np.float64)
        self.action_low = np.array([-1.0])
        self.action_high = np.array([1.0])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self.spec.init_noise * rng.standard_normal(2)

    def clip_action(self, actions: np.ndarray) -> np.ndarray:
        return np.clip(actions, self.action_low, self.action_high)

    def step(self, states, actions):
        s, squeeze = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        a = self.clip_action(a)
        x, v = s[:, 0], s[:, 1]
        dt = self.spec.dt
        for _ in range(self.spec.substeps):
            v = v + dt * a[:, 0] / self.mass
            x = x + dt * v
        out = np.stack([x, v], axis=1)
        if not np.isfinite(out).all():
            raise InvalidInputError("pointmass state became non-finite")
        return out[0] if squeeze else out

    def obs(self, states) -> np.ndarray:
        s, _ = _rows(states, self.state_dim)
        return s

    def features(self, states, actions) -> np.ndarray:
        s, _ = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        a = self.clip_action(a)
        return np.stack([-s[:, 0] ** 2, -s[:, 1] ** 2, -a[:, 0] ** 2], axis=1)

    def model_input(self, states, actions) -> np.ndarray:
        s, _ = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        return np.concatenate([s, self.clip_action(a)], axis=1)

    def ground_truth_reward(self, states, actions):
        s, squeeze = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        r = self.features(s, a) @ self.true_params
        return float(r[0]) if squeeze else r


class Cartpole:
    """Cart-and-rod swing-up. Pole angle phi is measured from upright, so the
    canonical start hangs at phi = pi.

    state  = (x, xdot, phi, phidot), action = normalized force in [-1, 1]
    reward = upright * middle * small_ctrl * small_vel, each factor in (0, 1]
    """

    kind = "cartpole"
    state_dim = 4
    action_dim = 1
    obs_dim = 5

    def __init__(self, spec: EnvSpec | None = None):
        self.spec = spec or EnvSpec(kind="cartpole", dt=0.01, substeps=5,
                                    ep_len=100)
        c = self.spec.constants
        self.cart_mass = float(c.get("cart_mass", 1.0))
        self.pole_mass = float(c.get("pole_mass", 0.1))
        self.half_length = float(c.get("half_length", 0.5))
        self.gravity = float(c.get("gravity", 9.81))
        self.force_mag = float(c.get("force_mag", 10.0))
        self.action_low = np.array([-1.0])
        self.action_high = np.array([1.0])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        base = np.array([0.0, 0.0, np.pi, 0.0])
        return base + self.spec.init_noise * rng.standard_normal(4)

    def clip_action(self, actions: np.ndarray) -> np.ndarray:
        return np.clip(actions, self.action_low, self.action_high)

    def step(self, states, actions):
        s, squeeze = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        force = self.clip_action(a)[:, 0] * self.force_mag
        x, xdot, phi, phidot = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        m_total = self.cart_mass + self.pole_mass
        ml = self.pole_mass * self.half_length
        dt = self.spec.dt
        for _ in range(self.spec.substeps):
            sin, cos = np.sin(phi), np.cos(phi)
            temp = (force + ml * phidot ** 2 * sin) / m_total
            phiacc = (self.gravity * sin - cos * temp) / (
                self.half_length * (4.0 / 3.0 - self.pole_mass * cos ** 2 / m_total))
            xacc = temp - ml * phiacc * cos / m_total
            xdot = xdot + dt * xacc
            phidot = phidot + dt * phiacc
            x = x + dt * xdot
            phi = phi + dt * phidot
        out = np.stack([x, xdot, phi, phidot], axis=1)
        if not np.isfinite(out).all():
            raise InvalidInputError("cartpole state became non-finite")
        return out[0] if squeeze else out

    def obs(self, states) -> np.ndarray:
        s, _ = _rows(states, self.state_dim)
        return np.stack(
            [s[:, 0], np.sin(s[:, 2]), np.cos(s[:, 2]), s[:, 1], s[:, 3]], axis=1)

    def model_input(self, states, actions) -> np.ndarray:
        s, _ = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        return np.concatenate([self.obs(s), self.clip_action(a)], axis=1)

    def ground_truth_reward(self, states, actions):
        s, squeeze = _rows(states, self.state_dim)
        a, _ = _rows(actions, self.action_dim)
        cmd = self.clip_action(a)[:, 0]
        upright = (np.cos(s[:, 2]) + 1.0) / 2.0
        middle = np.exp(-s[:, 0] ** 2)
        small_ctrl = (4.0 + np.exp(-4.0 * cmd ** 2)) / 5.0
        small_vel = (1.0 + np.exp(-0.5 * s[:, 1] ** 2)) / 2.0
        r = upright * middle * small_ctrl * small_vel
        return float(r[0]) if squeeze else r


_ENV_KINDS = {"pointmass": PointMass, "cartpole": Cartpole}


def make_env(spec: EnvSpec):
    if spec.kind not in _ENV_KINDS:
        raise InvalidInputError(f"unknown environment kind {spec.kind!r}")
    return _ENV_KINDS[spec.kind](spec)
