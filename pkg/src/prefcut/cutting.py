"""Batch cuts over the reward hypothesis space.

A preference batch induces a cut: the set of parameters whose vote count
(number of records whose signed preference gap is nonnegative) clears a
conservative threshold. The running hypothesis space is the intersection
of all cuts so far, decided pointwise through indicator functions; a
sigmoid-smoothed relaxation of the same indicator gives the differentiable
objective that ensemble sampling ascends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .rewards import InvalidInputError, Segment, preference_gap, segment_inputs


def _floor_tol(x: float, eps: float = 1e-9) -> int:
    """floor() robust to float representation of products like 0.8*10."""
    return int(math.floor(x + eps))


def _ceil_tol(x: float, eps: float = 1e-9) -> int:
    return int(math.ceil(x - eps))


@dataclass
class PreferenceRecord:
    """One labeled segment pair; the atomic unit of a batch cut."""

    seg0: Segment
    seg1: Segment
    label: int
    query_id: int
    source: str = "simulated"
    true_label: int | None = None   # pre-flip rational label (audit, simulated only)
    score: float | None = None      # disagreement score at acceptance (audit)

    def __post_init__(self):
        if self.label not in (0, 1):
            raise InvalidInputError(f"label must be 0 or 1, got {self.label!r}")
        if len(self.seg0) != len(self.seg1):
            raise InvalidInputError("paired segments must have equal length")


@dataclass
class PreferenceBatch:
    records: list[PreferenceRecord]
    batch_index: int

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class BatchHistory:
    """Ordered, append-only record of preference batches plus gamma."""

    conservativeness: float = 0.0
    batches: list[PreferenceBatch] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.conservativeness <= 1.0:
            raise InvalidInputError("conservativeness must be in [0, 1]")

    def append(self, batch: PreferenceBatch) -> None:
        if batch.batch_index != len(self.batches):
            raise InvalidInputError(
                f"batch index {batch.batch_index} out of order, "
                f"expected {len(self.batches)}")
        self.batches.append(batch)

    def __len__(self) -> int:
        return len(self.batches)

    def records(self):
        for batch in self.batches:
            yield from batch.records


@dataclass
class SmoothingConfig:
    """Sigmoid temperatures and threshold relaxation for the soft indicator."""

    alpha: float = 5.0
    beta: float = 3.0
    nu: float = 0.9

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise InvalidInputError("alpha and beta must be positive")
        if not 0.0 < self.nu <= 1.0:
            raise InvalidInputError("nu must be in (0, 1]")


def heaviside(x: float) -> int:
    """Step function with H(0) = 1."""
    if not np.isfinite(x):
        raise InvalidInputError("heaviside needs a finite argument")
    return 1 if x >= 0 else 0


def votes(model, batch: PreferenceBatch, params) -> int:
    """Number of records in the batch whose constraint the parameters satisfy."""
    if len(batch) == 0:
        raise InvalidInputError("empty batch")
    return sum(
        heaviside(preference_gap(model, params, r.seg0, r.seg1, r.label))
        for r in batch.records)


def cut_threshold(N: int, gamma: float) -> float:
    """Vote threshold floor((1-gamma)*N) - 0.5 for a conservative cut."""
    if N < 1:
        raise InvalidInputError("batch size must be >= 1")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("gamma must be in [0, 1]")
    return _floor_tol((1.0 - gamma) * N) - 0.5


def in_cut(model, batch: PreferenceBatch, gamma: float, params) -> bool:
    """Whether the parameters survive this batch's conservative cut."""
    return votes(model, batch, params) > cut_threshold(len(batch), gamma)


def in_hypothesis_space(model, history: BatchHistory, params) -> bool:
    """Exact membership: every batch cut so far must hold (empty history: yes)."""
    return all(
        in_cut(model, batch, history.conservativeness, params)
        for batch in history.batches)


def smoothed_cut_indicator(model, batch: PreferenceBatch, gamma: float,
                           smoothing: SmoothingConfig, params) -> float:
    """Soft in-cut indicator in (0, 1), monotone in every preference gap."""
    gaps = np.array([
        preference_gap(model, params, r.seg0, r.seg1, r.label)
        for r in batch.records])
    z = expit(smoothing.alpha * gaps).sum() - smoothing.nu * (1.0 - gamma) * len(batch)
    return float(expit(smoothing.beta * z))


def smoothed_log_objective(model, history: BatchHistory,
                           smoothing: SmoothingConfig, params):
    """Sum over batches of log soft indicators, with its analytic gradient.

    Returns (objective, gradient). Uses the log-sigmoid form throughout so
    saturated cuts never underflow to log(0).
    """
    if len(history) == 0:
        raise InvalidInputError("history must contain at least one batch")
    compiled = CompiledHistory.build(model, history)
    obj, grad = compiled.objective_and_grad(np.atleast_2d(params), smoothing)
    return float(obj[0]), grad[0]


class CompiledHistory:
    """A batch history flattened into stacked arrays for vectorized evaluation.

    Every record contributes two contiguous row spans of model inputs (seg0
    then seg1). Per-member rewards over all rows reduce to per-record gaps
    with one reduceat, and the objective gradient needs a single weighted
    backward pass per member block.
    """

    def __init__(self, model, X, span_starts, span_rows, signs, record_batch,
                 batch_sizes, gamma):
        self.model = model
        self.X = X                        # (n_rows, input_dim)
        self._x32 = None                  # lazy float32 copy for fast ascent
        self.span_starts = span_starts    # (2*n_records,) start row of each span
        self.span_rows = span_rows        # (2*n_records,) row count of each span
        self.signs = signs                # (n_records,) 1 - 2*label
        self.record_batch = record_batch  # (n_records,) owning batch index
        self.batch_sizes = batch_sizes    # (n_batches,)
        self.gamma = gamma
        self.n_records = len(signs)
        self.n_batches = len(batch_sizes)

    @classmethod
    def build(cls, model, history: BatchHistory) -> "CompiledHistory":
        rows, starts, counts, signs, rec_batch, batch_sizes = [], [], [], [], [], []
        pos = 0
        for k, batch in enumerate(history.batches):
            batch_sizes.append(len(batch))
            for rec in batch.records:
                for seg in (rec.seg0, rec.seg1):
                    xi = segment_inputs(model, seg)
                    rows.append(xi)
                    starts.append(pos)
                    counts.append(len(xi))
                    pos += len(xi)
                signs.append(1.0 - 2.0 * rec.label)
                rec_batch.append(k)
        X = np.vstack(rows) if rows else np.zeros((0, 1))
        return cls(model, X,
                   np.asarray(starts, dtype=np.intp),
                   np.asarray(counts, dtype=np.intp),
                   np.asarray(signs, dtype=np.float64),
                   np.asarray(rec_batch, dtype=np.intp),
                   np.asarray(batch_sizes, dtype=np.intp),
                   history.conservativeness)

    def _member_chunks(self, m: int):
        hidden = getattr(self.model, "hidden", None) or (1,)
        width = max(hidden)
        budget = 20_000_000  # floats of activation per layer, ~160 MB
        chunk = max(1, budget // max(1, len(self.X) * width))
        for lo in range(0, m, chunk):
            yield lo, min(lo + chunk, m)

    def gaps(self, thetas: np.ndarray) -> np.ndarray:
        """Signed preference gaps f for each member and record -> (m, n_records)."""
        thetas = np.atleast_2d(thetas)
        out = np.empty((thetas.shape[0], self.n_records))
        for lo, hi in self._member_chunks(thetas.shape[0]):
            rewards, _ = self.model.forward(thetas[lo:hi], self.X)
            out[lo:hi] = self._gaps_from_rewards(rewards)
        return out

    def _gaps_from_rewards(self, rewards: np.ndarray) -> np.ndarray:
        spans = np.add.reduceat(rewards, self.span_starts, axis=1)
        return self.signs * (spans[:, 0::2] - spans[:, 1::2])

    def votes(self, thetas: np.ndarray) -> np.ndarray:
        """Exact per-batch vote counts -> (m, n_batches) integers."""
        sat = (self.gaps(thetas) >= 0).astype(np.int64)
        out = np.zeros((sat.shape[0], self.n_batches), dtype=np.int64)
        np.add.at(out.T, self.record_batch, sat.T)
        return out

    def thresholds(self) -> np.ndarray:
        return np.array([cut_threshold(int(n), self.gamma) for n in self.batch_sizes])

    def membership(self, thetas: np.ndarray) -> np.ndarray:
        """Exact hypothesis-space membership per member -> (m,) bool."""
        if self.n_batches == 0:
            return np.ones(np.atleast_2d(thetas).shape[0], dtype=bool)
        return (self.votes(thetas) > self.thresholds()).all(axis=1)

    def objective_and_grad(self, thetas: np.ndarray, smoothing: SmoothingConfig,
                           fast: bool = False):
        """Smoothed log objective and gradient for all members -> ((m,), (m, r)).

        fast=True evaluates the network in float32; the returned float64
        arrays then carry single-precision noise. Only optimization steps
        use it, never the exact indicator or the public gradient contract.
        """
        thetas = np.atleast_2d(thetas)
        m = thetas.shape[0]
        obj = np.empty(m)
        grad = np.empty((m, thetas.shape[1]))
        offsets = smoothing.nu * (1.0 - self.gamma) * self.batch_sizes
        X = self.X
        if fast:
            if self._x32 is None:
                self._x32 = self.X.astype(np.float32)
            X = self._x32
        for lo, hi in self._member_chunks(m):
            rewards, cache = self.model.forward(thetas[lo:hi], X)
            f = self._gaps_from_rewards(rewards)                   # (mc, n_rec)
            sig = expit(smoothing.alpha * f)
            z = np.zeros((hi - lo, self.n_batches))
            np.add.at(z.T, self.record_batch, sig.T)
            z -= offsets
            obj[lo:hi] = log_expit(smoothing.beta * z).sum(axis=1)
            # d obj / d f_j = beta * (1 - sigma_beta(z_k)) * alpha * sig_j * (1 - sig_j)
            batch_coef = smoothing.beta * expit(-smoothing.beta * z)
            rec_coef = batch_coef[:, self.record_batch] \
                * smoothing.alpha * sig * (1.0 - sig) * self.signs
            span_coef = np.repeat(rec_coef, 2, axis=1)
            span_coef[:, 1::2] *= -1.0
            seeds = np.repeat(span_coef, self.span_rows, axis=1)
            grad[lo:hi] = self.model.backward(cache, seeds)
        return obj, grad

    def pairwise_logistic_loss(self, thetas: np.ndarray, temperature: float):
        """Negative log-likelihood of the labels under a logistic preference
        model with the given temperature, plus its gradient.

        The labeled winner of record j has signed gap f_j >= 0 exactly when
        the member agrees with the label, so the per-record likelihood is
        sigma(temperature * f_j).
        """
        thetas = np.atleast_2d(thetas)
        m = thetas.shape[0]
        loss = np.empty(m)
        grad = np.empty((m, thetas.shape[1]))
        for lo, hi in self._member_chunks(m):
            rewards, cache = self.model.forward(thetas[lo:hi], self.X)
            f = self._gaps_from_rewards(rewards)
            loss[lo:hi] = -log_expit(temperature * f).sum(axis=1)
            rec_coef = -temperature * expit(-temperature * f) * self.signs
            span_coef = np.repeat(rec_coef, 2, axis=1)
            span_coef[:, 1::2] *= -1.0
            seeds = np.repeat(span_coef, self.span_rows, axis=1)
            grad[lo:hi] = self.model.backward(cache, seeds)
        return loss, grad
