"""Drawing reward-parameter ensembles from the current hypothesis space.

Members start from warm starts (previous ensemble) plus a few fresh random
restarts, ascend the smoothed log objective with Adam, are filtered by the
exact membership indicator, and the survivors are densified back to the
configured ensemble size with small parameter noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cutting import BatchHistory, CompiledHistory, SmoothingConfig
from .rewards import InvalidInputError


class SamplerFailedError(RuntimeError):
    """No usable ensemble member could be produced."""


@dataclass
class SamplerConfig:
    ensemble_size: int = 16
    step_size: float = 0.005
    steps: int = 80
    weight_decay: float = 0.001
    init_scale: float = 1.0
    densify_noise: float = 0.01   # relative to each member's parameter norm
    fresh_restarts: int | None = None   # default: ceil(M / 4)
    max_retries: int = 3
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    # Temperature schedule for the ascent. The inner sigmoid starts
    # softened by soften_factor (deeply violated constraints keep gradient
    # signal for repair), holds through the head of the run, then ramps to
    # sharpen_factor * alpha over the last sharpen_fraction of the steps
    # (disagreement-selected cuts slice right through the warm ensemble,
    # so the finish needs boundary-scale resolution).
    sharpen_factor: float = 1.0
    sharpen_fraction: float = 0.4
    soften_factor: float = 1.0

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise InvalidInputError("ensemble size must be >= 2")
        if self.step_size <= 0 or self.steps < 0:
            raise InvalidInputError("need positive step size and step count >= 0")

    @property
    def n_fresh(self) -> int:
        if self.fresh_restarts is not None:
            return min(self.fresh_restarts, self.ensemble_size)
        return int(np.ceil(self.ensemble_size / 4))


@dataclass
class Ensemble:
    members: np.ndarray          # (M, param_dim)
    iteration: int = 0

    def __post_init__(self):
        self.members = np.atleast_2d(np.asarray(self.members, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.members)


def initialize_ensemble(model, config: SamplerConfig,
                        rng: np.random.Generator) -> Ensemble:
    """M independent draws from the model's standard initialization."""
    if config.init_scale == 0.0:
        warnings.warn("init_scale=0 produces an all-zero ensemble")
    members = np.stack([
        model.init_params(rng, scale=config.init_scale)
        for _ in range(config.ensemble_size)])
    return Ensemble(members=members)


def _adam_ascent(model, compiled: CompiledHistory, thetas: np.ndarray,
                 config: SamplerConfig, rng: np.random.Generator,
                 steps: int) -> np.ndarray:
    """Independent Adam ascent of the smoothed objective for every row.

    Every exact-indicator point is an argmax of the true objective, so a
    member freezes the moment it passes exact membership: ascending further
    would only herd all members toward the smooth surrogate's argmax and
    collapse ensemble diversity. Rows whose objective or gradient goes
    non-finite are restarted from a fresh initialization (bounded retries);
    rows that keep failing are dropped from the returned array.
    """
    thetas = np.array(thetas, dtype=np.float64)
    n, r = thetas.shape
    m1 = np.zeros_like(thetas)
    m2 = np.zeros_like(thetas)
    t_step = np.zeros(n)
    retries = np.zeros(n, dtype=int)
    failed = np.zeros(n, dtype=bool)
    frozen = compiled.membership(thetas) if steps > 0 else np.zeros(n, dtype=bool)
    b1, b2, eps = 0.9, 0.999, 1e-8
    base = config.smoothing
    switch = int((1.0 - config.sharpen_fraction) * steps)
    lo = base.alpha / config.soften_factor
    hi = base.alpha * config.sharpen_factor
    check_every = 10
    for step in range(steps):
        idx = np.flatnonzero(~(failed | frozen))
        if idx.size == 0:
            break
        smoothing = base
        if lo != base.alpha or hi != base.alpha:
            alpha = lo
            if step >= switch and steps > switch:
                u = (step - switch + 1) / (steps - switch)
                alpha = lo * (hi / lo) ** u
            smoothing = SmoothingConfig(alpha=alpha, beta=base.beta,
                                        nu=base.nu)
        obj, grad = compiled.objective_and_grad(thetas[idx], smoothing,
                                                fast=True)
        moved = np.ones(idx.size, dtype=bool)
        bad = ~(np.isfinite(obj) & np.isfinite(grad).all(axis=1))
        for j in np.flatnonzero(bad):
            i = idx[j]
            moved[j] = False
            if retries[i] >= config.max_retries:
                failed[i] = True
                continue
            retries[i] += 1
            thetas[i] = model.init_params(rng, scale=config.init_scale)
            m1[i] = m2[i] = 0.0
            t_step[i] = 0.0
        gi = idx[moved]
        if gi.size:
            g = -grad[moved] + config.weight_decay * thetas[gi]
            t_step[gi] += 1.0
            m1[gi] = b1 * m1[gi] + (1 - b1) * g
            m2[gi] = b2 * m2[gi] + (1 - b2) * g ** 2
            t = t_step[gi][:, None]
            mhat = m1[gi] / (1 - b1 ** t)
            vhat = m2[gi] / (1 - b2 ** t)
            thetas[gi] -= config.step_size * mhat / (np.sqrt(vhat) + eps)
        if (step + 1) % check_every == 0 or step == steps - 1:
            check = np.flatnonzero(~(failed | frozen))
            if check.size:
                frozen[check] |= compiled.membership(thetas[check])
    return thetas[~failed]


def sample_ensemble(model, history: BatchHistory, config: SamplerConfig,
                    warm_start: Ensemble | None, rng: np.random.Generator,
                    steps: int | None = None) -> Ensemble:
    """Raw ensemble: ascent endpoints from warm starts plus fresh restarts."""
    if len(history) == 0:
        return initialize_ensemble(model, config, rng)
    M = config.ensemble_size
    if warm_start is None or len(warm_start) == 0:
        starts = initialize_ensemble(model, config, rng).members
    else:
        starts = np.array(warm_start.members[:M], dtype=np.float64)
        while len(starts) < M:
            starts = np.vstack([starts, starts[:M - len(starts)]])
        n_fresh = min(config.n_fresh, M)
        if n_fresh > 0:
            idx = rng.choice(M, size=n_fresh, replace=False)
            for i in idx:
                starts[i] = model.init_params(rng, scale=config.init_scale)
    compiled = CompiledHistory.build(model, history)
    endpoints = _adam_ascent(model, compiled, starts, config, rng,
                             config.steps if steps is None else steps)
    if len(endpoints) == 0:
        raise SamplerFailedError("every ensemble member failed during ascent")
    return Ensemble(members=endpoints)


def filter_ensemble(model, history: BatchHistory, ensemble: Ensemble) -> np.ndarray:
    """Members that pass the exact indicator, order preserved -> (k, r)."""
    if len(ensemble) == 0:
        return ensemble.members
    keep = CompiledHistory.build(model, history).membership(ensemble.members)
    return ensemble.members[keep]


def densify(kept: np.ndarray, M: int, densify_noise, rng: np.random.Generator,
            model=None, history: BatchHistory | None = None,
            recheck_tries: int = 5) -> Ensemble:
    """Pad a surviving subset back to size M with noised duplicates.

    densify_noise is the per-coordinate noise stddev (scalar, or one value
    per kept member). When model+history are given, each noised copy is
    re-checked against the exact indicator and re-noised up to
    `recheck_tries` times; a copy that keeps failing is duplicated exactly.
    """
    kept = np.atleast_2d(np.asarray(kept, dtype=np.float64))
    if len(kept) == 0:
        raise SamplerFailedError("cannot densify an empty subset")
    if len(kept) >= M:
        return Ensemble(members=kept[:M])
    scales = np.broadcast_to(np.asarray(densify_noise, dtype=np.float64),
                             (len(kept),))
    compiled = None
    if model is not None and history is not None and len(history) > 0:
        compiled = CompiledHistory.build(model, history)
    extras = []
    for _ in range(M - len(kept)):
        i = int(rng.integers(len(kept)))
        candidate = kept[i] + scales[i] * rng.standard_normal(kept.shape[1])
        if compiled is not None:
            tries = 0
            while not compiled.membership(candidate[None, :])[0]:
                tries += 1
                if tries >= recheck_tries:
                    candidate = kept[i].copy()
                    break
                candidate = kept[i] + scales[i] * rng.standard_normal(kept.shape[1])
        extras.append(candidate)
    return Ensemble(members=np.vstack([kept, np.stack(extras)]))


def _relative_noise(kept: np.ndarray, fraction: float) -> np.ndarray:
    norms = np.linalg.norm(kept, axis=1)
    return fraction * norms / np.sqrt(kept.shape[1])


def draw_ensemble(model, history: BatchHistory, config: SamplerConfig,
                  warm_start: Ensemble | None, rng: np.random.Generator,
                  iteration: int = 0):
    """Full sample -> filter -> densify pipeline with the empty-set fallback.

    Returns (ensemble, info). info carries the exact-filter pass rate and a
    degraded flag set when the filter emptied out twice and the ensemble
    was rebuilt from the highest-voted members.
    """
    raw = sample_ensemble(model, history, config, warm_start, rng)
    if len(history) == 0:
        raw.iteration = iteration
        return raw, {"pass_rate": 1.0, "degraded": False}
    kept = filter_ensemble(model, history, raw)
    pass_rate = len(kept) / len(raw)
    degraded = False
    if len(kept) == 0:
        # Warm starts with a longer ascent recover far more reliably than
        # fresh draws once the space is a thin cone; try both in that order.
        for restart in (warm_start, None):
            raw = sample_ensemble(model, history, config, restart, rng,
                                  steps=2 * config.steps)
            kept = filter_ensemble(model, history, raw)
            pass_rate = len(kept) / len(raw)
            if len(kept) > 0:
                break
    if len(kept) == 0:
        degraded = True
        totals = CompiledHistory.build(model, history).votes(raw.members).sum(axis=1)
        order = np.argsort(totals)[::-1]
        kept = raw.members[order[:max(1, config.ensemble_size // 4)]]
    noise = _relative_noise(kept, config.densify_noise)
    ensemble = densify(kept, config.ensemble_size, noise, rng,
                       model=None if degraded else model,
                       history=None if degraded else history)
    ensemble.iteration = iteration
    return ensemble, {"pass_rate": pass_rate, "degraded": degraded}
