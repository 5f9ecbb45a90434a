"""Parametric reward models and the signed preference-gap function.

Two model families share one interface: linear-in-features models (exact,
used wherever a ground-truth parameter vector must be representable) and
small MLPs with hand-rolled backpropagation (no autodiff framework).
Both evaluate rewards and parameter gradients on stacked input matrices so
the cutting and planning layers can vectorize over segments and over
ensemble members.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Model/parameter/input dimensions do not line up."""


class InvalidInputError(ValueError):
    """Structurally invalid trajectory or segment data."""


@dataclass
class Trajectory:
    """A rollout: T+1 states and the T actions taken between them."""

    states: np.ndarray   # (T+1, state_dim)
    actions: np.ndarray  # (T, action_dim)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise InvalidInputError("states and actions must be 2-D arrays")
        if len(self.states) != len(self.actions) + 1:
            raise InvalidInputError(
                f"need len(states) == len(actions)+1, got "
                f"{len(self.states)} vs {len(self.actions)}")
        if len(self.actions) == 0:
            raise InvalidInputError("empty trajectory")
        if not (np.isfinite(self.states).all() and np.isfinite(self.actions).all()):
            raise InvalidInputError("non-finite trajectory data")

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class Segment(Trajectory):
    """A fixed-length window of a parent trajectory."""

    source_id: int = -1
    offset: int = 0
    segment_id: int = -1


def concat_trajectories(a: Trajectory, b: Trajectory) -> Trajectory:
    """Join two trajectories that share a boundary state."""
    if not np.allclose(a.states[-1], b.states[0]):
        raise InvalidInputError("trajectories do not share a boundary state")
    return Trajectory(states=np.vstack([a.states, b.states[1:]]),
                      actions=np.vstack([a.actions, b.actions]))


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


class LinearRewardModel:
    """r(s, a) = dot(theta, phi(s, a)) for a fixed feature map phi.

    feature_fn maps (states (n, ds), actions (n, da)) -> features (n, r)
    and must be deterministic. Squashing is off by default so linear
    ground-truth parameters stay exactly representable.
    """

    kind = "linear-features"

    def __init__(self, feature_fn, param_dim: int, squash: bool = False,
                 feature_id: str = "custom"):
        self.feature_fn = feature_fn
        self.param_dim = int(param_dim)
        self.squash = bool(squash)
        self.feature_id = feature_id

    def describe(self) -> dict:
        return {"kind": self.kind, "feature_id": self.feature_id,
                "param_dim": self.param_dim, "squash": self.squash}

    def init_params(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return scale * rng.standard_normal(self.param_dim)

    def inputs(self, states, actions) -> np.ndarray:
        """Precompute the feature matrix for a stack of (s, a) rows."""
        phi = np.asarray(self.feature_fn(_as_rows(states), _as_rows(actions)),
                         dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != self.param_dim:
            raise ConfigurationError(
                f"feature map returned shape {phi.shape}, expected (n, {self.param_dim})")
        return phi

    def _check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape[-1] != self.param_dim:
            raise ConfigurationError(
                f"parameter dim {theta.shape[-1]} != model dim {self.param_dim}")
        return theta

    def forward(self, thetas: np.ndarray, X: np.ndarray):
        """Rewards for members (m, r) on input rows (n, r) -> ((m, n), cache)."""
        thetas = self._check_theta(np.atleast_2d(thetas))
        z = thetas @ X.T
        out = np.tanh(z) if self.squash else z
        return out, (X, out)

    def backward(self, cache, seeds: np.ndarray) -> np.ndarray:
        """Sum_i seeds[m, i] * d r(x_i; theta_m) / d theta -> (m, r)."""
        X, out = cache
        if self.squash:
            seeds = seeds * (1.0 - out ** 2)
        return seeds @ X

    def reward_from_inputs(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        out, _ = self.forward(theta, X)
        return out[0]

    def reward(self, theta, state, action) -> float:
        return float(self.reward_from_inputs(theta, self.inputs(state, action))[0])

    def param_gradient(self, theta, state, action) -> np.ndarray:
        X = self.inputs(state, action)
        _, cache = self.forward(theta, X)
        return self.backward(cache, np.ones((1, 1)))[0]


def _activation(name: str):
    if name == "tanh":
        return np.tanh, lambda a: 1.0 - a ** 2
    if name == "relu":
        return lambda z: np.maximum(z, 0.0), lambda a: (a > 0).astype(np.float64)
    raise ConfigurationError(f"unknown activation {name!r}")


class MLPRewardModel:
    """Fully-connected reward network with manual backprop.

    Parameters are a single flat vector (weights then bias per layer).
    forward/backward operate on a stack of member parameter vectors at
    once; matmul broadcasting over the member axis keeps ensemble-wide
    evaluation in a handful of BLAS calls.
    """

    kind = "mlp"

    def __init__(self, input_dim: int, hidden=(32, 32), activation: str = "tanh",
                 squash: bool = True, input_fn=None):
        self.input_dim = int(input_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        self.squash = bool(squash)
        self.input_fn = input_fn
        self._act, self._dact = _activation(activation)
        self.layer_sizes = (self.input_dim,) + self.hidden + (1,)
        self.param_dim = sum((self.layer_sizes[i] + 1) * self.layer_sizes[i + 1]
                             for i in range(len(self.layer_sizes) - 1))

    def describe(self) -> dict:
        return {"kind": self.kind, "input_dim": self.input_dim,
                "hidden": list(self.hidden), "activation": self.activation,
                "squash": self.squash, "param_dim": self.param_dim}

    def init_params(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """Fan-in-scaled normal weights, zero biases."""
        chunks = []
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = rng.standard_normal((n_in, n_out)) * (scale / np.sqrt(n_in))
            chunks.append(w.ravel())
            chunks.append(np.zeros(n_out))
        return np.concatenate(chunks)

    def inputs(self, states, actions) -> np.ndarray:
        states, actions = _as_rows(states), _as_rows(actions)
        if self.input_fn is not None:
            X = np.asarray(self.input_fn(states, actions), dtype=np.float64)
        else:
            X = np.concatenate([states, actions], axis=1)
        if X.shape[1] != self.input_dim:
            raise ConfigurationError(
                f"model input dim {X.shape[1]} != declared {self.input_dim}")
        return X

    def unpack(self, thetas: np.ndarray, dtype=np.float64):
        """Flat (m, r) -> per-layer weight (m, n_in, n_out) and bias (m, 1, n_out)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=dtype))
        if thetas.shape[1] != self.param_dim:
            raise ConfigurationError(
                f"parameter dim {thetas.shape[1]} != model dim {self.param_dim}")
        m = thetas.shape[0]
        weights, biases, pos = [], [], 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = thetas[:, pos:pos + n_in * n_out].reshape(m, n_in, n_out)
            pos += n_in * n_out
            b = thetas[:, pos:pos + n_out].reshape(m, 1, n_out)
            pos += n_out
            weights.append(w)
            biases.append(b)
        return weights, biases

    def pack_gradients(self, dws, dbs) -> np.ndarray:
        m = dws[0].shape[0]
        parts = []
        for dw, db in zip(dws, dbs):
            parts.append(dw.reshape(m, -1))
            parts.append(db.reshape(m, -1))
        return np.concatenate(parts, axis=1)

    def forward(self, thetas: np.ndarray, X: np.ndarray):
        """Rewards for members (m, r) on input rows (n, d) -> ((m, n), cache).

        One fused GEMM for the shared first layer, then per-member 2-D GEMMs
        with preallocated outputs; measurably faster than broadcast batched
        matmul for the row counts the cutting objective sees.
        """
        weights, biases = self.unpack(thetas, dtype=X.dtype)
        m = weights[0].shape[0]
        n = X.shape[0]
        h1 = weights[0].shape[2]
        w1_flat = weights[0].transpose(1, 0, 2).reshape(self.input_dim, m * h1)
        a = np.ascontiguousarray(
            (X @ w1_flat).reshape(n, m, h1).transpose(1, 0, 2))
        a += biases[0]
        if self.activation == "tanh":
            np.tanh(a, out=a)
        else:
            np.maximum(a, 0.0, out=a)
        acts = [a]
        for w, b in zip(weights[1:-1], biases[1:-1]):
            nxt = np.empty((m, n, w.shape[2]), dtype=a.dtype)
            for k in range(m):
                np.matmul(a[k], w[k], out=nxt[k])
            nxt += b
            if self.activation == "tanh":
                np.tanh(nxt, out=nxt)
            else:
                np.maximum(nxt, 0.0, out=nxt)
            acts.append(nxt)
            a = nxt
        z = np.empty((m, n, 1), dtype=a.dtype)
        for k in range(m):
            np.matmul(a[k], weights[-1][k], out=z[k])
        z = z[..., 0] + biases[-1][..., 0]
        out = np.tanh(z) if self.squash else z
        return out, (X, weights, acts, out)

    def backward(self, cache, seeds: np.ndarray) -> np.ndarray:
        """Sum_i seeds[m, i] * d r(x_i; theta_m) / d theta -> (m, r)."""
        X, weights, acts, out = cache
        m, n = out.shape
        seeds = np.asarray(seeds, dtype=out.dtype)
        if self.squash:
            dz = seeds * (1.0 - out ** 2)
        else:
            dz = np.array(seeds, copy=True)
        dz = dz[..., None]                      # (m, n, 1)
        dws, dbs = [], []
        dact_buf = None
        for layer in range(len(weights) - 1, -1, -1):
            a_prev = acts[layer - 1] if layer > 0 else None
            width = dz.shape[2]
            dw = np.empty((m, weights[layer].shape[1], width),
                          dtype=dz.dtype)
            if layer == 0:
                xt = X.T
                for k in range(m):
                    np.matmul(xt, dz[k], out=dw[k])
            else:
                for k in range(m):
                    np.matmul(a_prev[k].T, dz[k], out=dw[k])
            db = dz.sum(axis=1, keepdims=True)
            dws.append(dw)
            dbs.append(db)
            if layer > 0:
                da = np.empty((m, n, weights[layer].shape[1]),
                              dtype=dz.dtype)
                for k in range(m):
                    np.matmul(dz[k], weights[layer][k].T, out=da[k])
                if self.activation == "tanh":
                    if dact_buf is None or dact_buf.shape != a_prev.shape:
                        dact_buf = np.empty_like(a_prev)
                    np.multiply(a_prev, a_prev, out=dact_buf)
                    np.subtract(1.0, dact_buf, out=dact_buf)
                    da *= dact_buf
                else:
                    da *= a_prev > 0
                dz = da
        return self.pack_gradients(dws[::-1], dbs[::-1])

    def reward_from_inputs(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        out, _ = self.forward(theta, X)
        return out[0]

    def reward(self, theta, state, action) -> float:
        return float(self.reward_from_inputs(theta, self.inputs(state, action))[0])

    def param_gradient(self, theta, state, action) -> np.ndarray:
        X = self.inputs(state, action)
        _, cache = self.forward(theta, X)
        return self.backward(cache, np.ones((1, 1)))[0]


def reward(model, params, state, action) -> float:
    """Scalar reward r(s, a) under the given parameters."""
    return model.reward(params, state, action)


def reward_param_gradient(model, params, state, action) -> np.ndarray:
    """Analytic gradient of r(s, a) with respect to the flat parameters."""
    return model.param_gradient(params, state, action)


def segment_inputs(model, traj: Trajectory) -> np.ndarray:
    """Model input rows for every (s_t, a_t) step of a trajectory/segment."""
    return model.inputs(traj.states[:-1], traj.actions)


def trajectory_return(model, params, traj: Trajectory) -> float:
    """Sum of per-step rewards over the whole trajectory."""
    X = segment_inputs(model, traj)
    return float(np.sum(model.reward_from_inputs(params, X)))


def preference_gap(model, params, seg0: Trajectory, seg1: Trajectory,
                   label: int) -> float:
    """Signed return gap (1 - 2*label) * (J(seg0) - J(seg1)).

    Nonnegative exactly when the parameters agree with the label.
    """
    if label not in (0, 1):
        raise InvalidInputError(f"label must be 0 or 1, got {label!r}")
    j0 = trajectory_return(model, params, seg0)
    j1 = trajectory_return(model, params, seg1)
    return (1.0 - 2.0 * label) * (j0 - j1)
