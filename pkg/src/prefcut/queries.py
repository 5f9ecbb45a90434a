"""Segment buffering, ensemble-disagreement scoring, and batch assembly.

Candidate segment pairs are drawn at random from the buffer, scored by how
evenly the current ensemble splits on their ranking, and only pairs above
the disagreement threshold are sent to the oracle. Assembly keeps going
until the batch holds N labeled pairs or the candidate budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cutting import PreferenceBatch, PreferenceRecord
from .rewards import InvalidInputError, Segment, Trajectory, segment_inputs
from .sampling import Ensemble


@dataclass
class QueryConfig:
    batch_size: int = 10
    disagreement_threshold: float = 0.75
    segments_per_trajectory: int = 2
    max_candidate_draws: int | None = None   # default 200 * batch_size
    buffer_trajectories: int = 50            # capacity, in trajectories' worth

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidInputError("batch size must be >= 1")
        if not 0.0 <= self.disagreement_threshold < 1.0:
            raise InvalidInputError("disagreement threshold must be in [0, 1)")

    @property
    def draw_budget(self) -> int:
        if self.max_candidate_draws is not None:
            return self.max_candidate_draws
        return 200 * self.batch_size


class SegmentBuffer:
    """FIFO store of fixed-length segments with unique ids."""

    def __init__(self, capacity: int):
        if capacity < 2:
            raise InvalidInputError("buffer capacity must be >= 2")
        self.capacity = capacity
        self.segments: list[Segment] = []
        self._next_id = 0

    def add(self, segment: Segment) -> Segment:
        segment.segment_id = self._next_id
        self._next_id += 1
        self.segments.append(segment)
        if len(self.segments) > self.capacity:
            self.segments = self.segments[-self.capacity:]
        return segment

    def extend(self, segments) -> None:
        for seg in segments:
            self.add(seg)

    def __len__(self) -> int:
        return len(self.segments)


def segment_trajectory(traj: Trajectory, Z: int, T_seg: int,
                       rng: np.random.Generator, source_id: int = -1):
    """Cut Z length-T_seg windows at uniform random offsets."""
    T = len(traj)
    if T < T_seg:
        raise InvalidInputError(f"trajectory length {T} < segment length {T_seg}")
    n_offsets = T - T_seg + 1
    offsets = rng.choice(n_offsets, size=Z, replace=n_offsets < Z)
    return [
        Segment(states=traj.states[off:off + T_seg + 1].copy(),
                actions=traj.actions[off:off + T_seg].copy(),
                source_id=source_id, offset=int(off))
        for off in offsets]


def ensemble_returns(model, ensemble: Ensemble, segments) -> np.ndarray:
    """Member-by-segment return table -> (M, n_segments)."""
    inputs = [segment_inputs(model, seg) for seg in segments]
    starts = np.cumsum([0] + [len(x) for x in inputs[:-1]]).astype(np.intp)
    X = np.vstack(inputs)
    rewards, _ = model.forward(ensemble.members, X)
    return np.add.reduceat(rewards, starts, axis=1)


def disagreement_score(model, ensemble: Ensemble, seg0: Segment,
                       seg1: Segment) -> float:
    """4 * n_plus * n_minus / M^2: 0 when unanimous, 1 when evenly split."""
    if len(ensemble) < 2:
        raise InvalidInputError("disagreement needs an ensemble of >= 2")
    j = ensemble_returns(model, ensemble, [seg0, seg1])
    return _score_from_returns(j[:, 0], j[:, 1], len(ensemble))


def _score_from_returns(j0: np.ndarray, j1: np.ndarray, M: int) -> float:
    n_plus = int(np.sum(j0 > j1))
    return 4.0 * n_plus * (M - n_plus) / (M * M)


@dataclass
class AcceptedQuery:
    """A labeled pair waiting for batch completion."""

    seg0: Segment
    seg1: Segment
    query_id: int
    score: float
    label: int
    true_label: int | None
    source: str = "simulated"


@dataclass
class QueryDecision:
    query_id: int
    score: float
    accepted: bool
    seg_ids: tuple[int, int] = (-1, -1)


class PartialBatchError(RuntimeError):
    """Candidate budget ran out before the batch filled.

    Carries everything accepted so far so the caller can top up the buffer
    with fresh trajectories and resume assembly.
    """

    def __init__(self, accepted, decisions):
        super().__init__(
            f"batch assembly stalled with {len(accepted)} accepted records")
        self.accepted = accepted
        self.decisions = decisions


def assemble_batch(buffer: SegmentBuffer, model, ensemble: Ensemble,
                   config: QueryConfig, oracle, rng: np.random.Generator,
                   batch_index: int, id_counter,
                   carry: list[AcceptedQuery] | None = None,
                   threshold_override: float | None = None):
    """Fill one preference batch by disagreement-gated oracle queries.

    Returns (PreferenceBatch, decisions). Raises PartialBatchError when the
    draw budget is exhausted first. threshold_override replaces the config
    threshold for degraded last-resort assembly (the harness's business);
    records always carry the score they were accepted at.
    """
    if len(buffer) < 2:
        raise InvalidInputError("buffer needs at least two segments")
    eta = config.disagreement_threshold if threshold_override is None \
        else threshold_override
    accepted = list(carry) if carry else []
    decisions: list[QueryDecision] = []
    returns = ensemble_returns(model, ensemble, buffer.segments)
    M = len(ensemble)
    draws = 0
    while len(accepted) < config.batch_size:
        if draws >= config.draw_budget:
            raise PartialBatchError(accepted, decisions)
        draws += 1
        i, k = rng.choice(len(buffer), size=2, replace=False)
        seg0, seg1 = buffer.segments[i], buffer.segments[k]
        score = _score_from_returns(returns[:, i], returns[:, k], M)
        qid = next(id_counter)
        ok = score > eta
        decisions.append(QueryDecision(qid, score, ok,
                                       (seg0.segment_id, seg1.segment_id)))
        if not ok:
            continue
        label, truth = oracle.label(seg0, seg1, query_id=qid)
        accepted.append(AcceptedQuery(seg0, seg1, qid, score, label, truth,
                                      source=getattr(oracle, "source", "simulated")))
    return _finalize(accepted, oracle, batch_index), decisions


def _finalize(accepted, oracle, batch_index: int) -> PreferenceBatch:
    labels = oracle.finalize_batch([a.label for a in accepted])
    records = [
        PreferenceRecord(seg0=a.seg0, seg1=a.seg1, label=int(lab),
                         query_id=a.query_id, source=a.source,
                         true_label=a.true_label, score=a.score)
        for a, lab in zip(accepted, labels)]
    return PreferenceBatch(records=records, batch_index=batch_index)


def disagreement_fraction(buffer: SegmentBuffer, model, ensemble: Ensemble,
                          eta: float, rng: np.random.Generator,
                          n_pairs: int = 500) -> float:
    """Fraction of random buffer pairs whose score clears eta.

    The empirical stand-in for hypothesis-space shrinkage: as cuts
    accumulate, ever fewer random pairs remain worth querying.
    """
    if len(buffer) < 2:
        return 0.0
    returns = ensemble_returns(model, ensemble, buffer.segments)
    M = len(ensemble)
    hits = 0
    for _ in range(n_pairs):
        i, k = rng.choice(len(buffer), size=2, replace=False)
        if _score_from_returns(returns[:, i], returns[:, k], M) > eta:
            hits += 1
    return hits / n_pairs
