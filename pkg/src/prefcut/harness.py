"""Run orchestration: the full cutting loop, the Bradley-Terry baseline,
evaluation, correlation analysis, and on-disk run artifacts.

Both learners consume the identical data path (trajectory generation,
segmentation, buffering, disagreement gating, oracle wiring); they differ
only in how the reward ensemble is produced from the accumulated
preferences. That parity is structural: one RunLoop, two learner
strategies.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import BaselineConfig, BTLearner
from .cutting import BatchHistory, PreferenceBatch, PreferenceRecord, SmoothingConfig
from .envs import EnvSpec, make_env
from .oracles import OracleSpec, SimulatedOracle
from .planning import (EnsembleReward, GroundTruthReward, PlannerConfig,
                       generate_trajectory, random_policy_trajectory)
from .queries import (PartialBatchError, QueryConfig, SegmentBuffer,
                      assemble_batch, disagreement_fraction, segment_trajectory)
from .rewards import (InvalidInputError, LinearRewardModel, MLPRewardModel,
                      Segment, Trajectory)
from .sampling import Ensemble, SamplerConfig, draw_ensemble


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    model: dict = field(default_factory=lambda: {"kind": "linear"})
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    query: QueryConfig = field(default_factory=QueryConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    eval_planner: PlannerConfig | None = None
    oracle: OracleSpec = field(default_factory=OracleSpec)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    gamma: float = 0.0
    iterations: int = 20
    traj_len: int = 60
    seg_len: int = 20
    eval_len: int = 100
    seed: int = 0
    out_dir: str | None = None
    bootstrap_iterations: int = 1
    bootstrap_labels: int = 0        # simulated labels before a human takes over
    traj_per_iteration: int = 2
    checkpoint_every: int = 5
    eval_episodes: int = 5
    max_regen: int = 8

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidInputError("gamma must be in [0, 1]")
        if self.traj_len < self.seg_len:
            raise InvalidInputError("traj_len must be >= seg_len")

    def resolved_eval_planner(self) -> PlannerConfig:
        base = self.eval_planner if self.eval_planner is not None else self.planner
        return replace(base, explore=False)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["env"] = EnvSpec(**d.get("env", {}))
        d["sampler"] = _sampler_from_dict(d.get("sampler", {}))
        d["query"] = QueryConfig(**d.get("query", {}))
        d["planner"] = PlannerConfig(**d.get("planner", {}))
        if d.get("eval_planner") is not None:
            d["eval_planner"] = PlannerConfig(**d["eval_planner"])
        d["oracle"] = OracleSpec(**d.get("oracle", {}))
        d["baseline"] = BaselineConfig(**d.get("baseline", {}))
        return cls(**d)


def _sampler_from_dict(d: dict) -> SamplerConfig:
    d = dict(d)
    if "smoothing" in d and not isinstance(d["smoothing"], SmoothingConfig):
        d["smoothing"] = SmoothingConfig(**d["smoothing"])
    return SamplerConfig(**d)


def build_model(model_spec: dict, env):
    """Instantiate the reward model named by a config descriptor."""
    kind = model_spec.get("kind", "linear")
    if kind in ("linear", "linear-features"):
        return LinearRewardModel(env.features, env.feature_dim,
                                 squash=model_spec.get("squash", False),
                                 feature_id=getattr(env, "feature_id", env.kind))
    if kind == "mlp":
        return MLPRewardModel(
            input_dim=env.obs_dim + env.action_dim,
            hidden=tuple(model_spec.get("hidden", (32, 32))),
            activation=model_spec.get("activation", "tanh"),
            squash=model_spec.get("squash", True),
            input_fn=env.model_input)
    raise InvalidInputError(f"unknown model kind {kind!r}")


def build_oracle(config: RunConfig, env, rng: np.random.Generator):
    if config.oracle.kind == "human":
        raise InvalidInputError(
            "human oracle runs through the session service, not run_hsbc")
    return SimulatedOracle(config.oracle, env.ground_truth_reward, rng)


# ---------------------------------------------------------------------------
# learning curve and results


@dataclass
class CurvePoint:
    queries: int
    mean: float
    std: float
    iteration: int


@dataclass
class LearningCurve:
    points: list[CurvePoint] = field(default_factory=list)

    def append(self, point: CurvePoint) -> None:
        if self.points and point.queries < self.points[-1].queries:
            raise InvalidInputError("curve x-axis must be nondecreasing")
        self.points.append(point)

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self) -> str:
        lines = ["queries,mean,std,iteration"]
        lines += [f"{p.queries},{p.mean:.10g},{p.std:.10g},{p.iteration}"
                  for p in self.points]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "LearningCurve":
        curve = cls()
        for line in text.strip().splitlines()[1:]:
            q, m, s, i = line.split(",")
            curve.append(CurvePoint(int(q), float(m), float(s), int(i)))
        return curve


@dataclass
class RunResult:
    ensemble: Ensemble
    curve: LearningCurve
    history: BatchHistory
    events: list[dict]
    degraded: bool
    out_dir: str | None = None
    degraded_sampler: int = 0
    degraded_batches: int = 0
    learner: object | None = None


# ---------------------------------------------------------------------------
# evaluation


def _episode_score(env, traj: Trajectory) -> float:
    return float(np.sum(env.ground_truth_reward(traj.states[:-1], traj.actions)))


def evaluate_with_reward(env, reward_fn, planner: PlannerConfig, eval_len: int,
                         seeds) -> tuple[float, float, list[float]]:
    """Mean/stddev of ground-truth episode return when planning on reward_fn."""
    planner = replace(planner, explore=False)
    scores = []
    for s in seeds:
        rng = np.random.default_rng(int(s))
        traj = generate_trajectory(env, reward_fn, planner, eval_len, 0, rng)
        scores.append(_episode_score(env, traj))
    return float(np.mean(scores)), float(np.std(scores)), scores


def evaluate(env, model, ensemble: Ensemble, planner: PlannerConfig,
             eval_len: int, seeds) -> tuple[float, float, list[float]]:
    """Evaluation episodes planned under the ensemble-mean reward."""
    if len(ensemble) == 0:
        raise InvalidInputError("cannot evaluate an empty ensemble")
    return evaluate_with_reward(env, EnsembleReward(model, ensemble), planner,
                                eval_len, seeds)


def oracle_score(env, planner: PlannerConfig, eval_len: int, seeds):
    """Ceiling score: planning directly with the ground-truth reward."""
    return evaluate_with_reward(env, GroundTruthReward(env), planner,
                                eval_len, seeds)


def eval_seeds(base_seed: int, iteration: int, episodes: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=[base_seed, 0xE7A1, iteration])
    return [int(x) for x in ss.generate_state(episodes)]


def pearson_correlation(model, ensemble: Ensemble, env, trajectories):
    """Per-trajectory Pearson correlation between the ensemble-mean reward
    and the ground-truth reward sequences.

    Returns (values, mean, std); a zero-variance sequence yields None for
    that trajectory and is excluded from the aggregate.
    """
    reward_fn = EnsembleReward(model, ensemble)
    values: list[float | None] = []
    for traj in trajectories:
        if len(traj) < 3:
            raise InvalidInputError("correlation needs trajectories of length >= 3")
        learned = reward_fn(traj.states[:-1], traj.actions)
        truth = np.atleast_1d(env.ground_truth_reward(traj.states[:-1], traj.actions))
        if np.std(learned) == 0.0 or np.std(truth) == 0.0:
            values.append(None)
            continue
        values.append(float(np.corrcoef(learned, truth)[0, 1]))
    defined = [v for v in values if v is not None]
    mean = float(np.mean(defined)) if defined else float("nan")
    std = float(np.std(defined)) if defined else float("nan")
    return values, mean, std


# ---------------------------------------------------------------------------
# persistence


class IdCounter:
    """Resumable monotone counter (next() semantics)."""

    def __init__(self, start: int = 0):
        self.value = int(start)

    def __iter__(self):
        return self

    def __next__(self) -> int:
        v = self.value
        self.value += 1
        return v


def _segment_to_json(seg: Segment) -> dict:
    return {"segment_id": seg.segment_id, "source_id": seg.source_id,
            "offset": seg.offset, "states": seg.states.tolist(),
            "actions": seg.actions.tolist()}


def segment_from_json(d: dict) -> Segment:
    return Segment(states=np.asarray(d["states"]), actions=np.asarray(d["actions"]),
                   source_id=d["source_id"], offset=d["offset"],
                   segment_id=d["segment_id"])


def _record_to_json(rec: PreferenceRecord, batch_index: int) -> dict:
    return {"query_id": rec.query_id, "batch_index": batch_index,
            "seg0": rec.seg0.segment_id, "seg1": rec.seg1.segment_id,
            "label": rec.label, "source": rec.source,
            "true_label": rec.true_label, "score": rec.score}


class RunWriter:
    """Append-only artifact writer; every line is flushed for crash safety."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)
        self._segments_written: set[int] = set()

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _append(self, name: str, obj: dict) -> None:
        with open(self.path(name), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj) + "\n")
            fh.flush()

    def write_config(self, config: RunConfig) -> None:
        with open(self.path("config.json"), "w", encoding="utf-8") as fh:
            json.dump(config.to_dict(), fh, indent=2)

    def append_segment(self, seg: Segment) -> None:
        if seg.segment_id in self._segments_written:
            return
        self._segments_written.add(seg.segment_id)
        self._append("segments.jsonl", _segment_to_json(seg))

    def append_record(self, rec: PreferenceRecord, batch_index: int) -> None:
        self.append_segment(rec.seg0)
        self.append_segment(rec.seg1)
        self._append("preferences.jsonl", _record_to_json(rec, batch_index))

    def append_event(self, event: dict) -> None:
        self._append("events.jsonl", event)

    def write_curve(self, curve: LearningCurve) -> None:
        with open(self.path("curve.csv"), "w", encoding="utf-8") as fh:
            fh.write(curve.to_csv())

    def write_checkpoint(self, ensemble: Ensemble, iteration: int) -> None:
        np.savez(os.path.join(self.out_dir, "checkpoints",
                              f"ensemble_{iteration:04d}.npz"),
                 members=ensemble.members, iteration=iteration)

    def write_summary(self, summary: dict) -> None:
        with open(self.path("summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)


# ---------------------------------------------------------------------------
# learner strategies


class CutLearner:
    """Hypothesis-space sampling learner (the main method)."""

    name = "cut"

    def __init__(self, config: RunConfig, model, rng: np.random.Generator):
        self.config = config
        self.model = model
        self.rng = rng
        self.warm: Ensemble | None = None

    def ensemble(self, history: BatchHistory, iteration: int):
        ens, info = draw_ensemble(self.model, history, self.config.sampler,
                                  self.warm, self.rng, iteration)
        self.warm = ens
        return ens, info

    def update(self, history: BatchHistory) -> dict:
        return {}


class BaselineLearner:
    """Bradley-Terry regression learner over all accumulated preferences."""

    name = "bt"

    def __init__(self, config: RunConfig, model, rng: np.random.Generator):
        self.learner = BTLearner(model, config.baseline, rng)

    def ensemble(self, history: BatchHistory, iteration: int):
        return Ensemble(members=self.learner.thetas.copy(),
                        iteration=iteration), {}

    def update(self, history: BatchHistory) -> dict:
        loss = self.learner.train(history)
        return {"bt_loss": loss}


# ---------------------------------------------------------------------------
# the run loop


class RunLoop:
    """One preference-learning run: generation, querying, learning, eval."""

    def __init__(self, config: RunConfig, learner_cls, oracle=None,
                 writer: RunWriter | None = None):
        self.config = config
        self.env = make_env(config.env)
        self.model = build_model(config.model, self.env)
        ss = np.random.SeedSequence(config.seed)
        (self.rng_oracle, self.rng_learn, self.rng_plan, self.rng_query,
         self.rng_stats) = [np.random.default_rng(s) for s in ss.spawn(5)]
        self.oracle = oracle if oracle is not None \
            else build_oracle(config, self.env, self.rng_oracle)
        self.learner = learner_cls(config, self.model, self.rng_learn)
        self.history = BatchHistory(conservativeness=config.gamma)
        self.buffer = SegmentBuffer(
            capacity=config.query.buffer_trajectories
            * config.query.segments_per_trajectory)
        self.qid = IdCounter()
        self.traj_counter = IdCounter()
        self.curve = LearningCurve()
        self.events: list[dict] = []
        self.iteration = 0
        self.degraded_sampler = 0
        self.degraded_batches = 0
        self.carry = None
        self.on_phase = None     # optional callable(phase, iteration)
        self.writer = writer
        if writer is None and config.out_dir:
            self.writer = RunWriter(config.out_dir)
        if self.writer:
            self.writer.write_config(config)

    # -- helpers ------------------------------------------------------------

    def _event(self, **kv) -> None:
        self.events.append(kv)
        if self.writer:
            self.writer.append_event(kv)

    def _phase(self, phase: str, iteration: int) -> None:
        if self.on_phase is not None:
            self.on_phase(phase, iteration)

    def _generate(self, ensemble: Ensemble, iteration: int, n_traj: int) -> None:
        cfg = self.config
        for _ in range(n_traj):
            if iteration < cfg.bootstrap_iterations:
                traj = random_policy_trajectory(self.env, cfg.traj_len,
                                                self.rng_plan)
            else:
                traj = generate_trajectory(
                    self.env, EnsembleReward(self.model, ensemble),
                    cfg.planner, cfg.traj_len, iteration, self.rng_plan)
            source = next(self.traj_counter)
            segs = segment_trajectory(traj, cfg.query.segments_per_trajectory,
                                      cfg.seg_len, self.rng_query, source)
            for seg in segs:
                self.buffer.add(seg)
                if self.writer:
                    self.writer.append_segment(seg)

    def _checkpoint(self, ensemble: Ensemble, iteration: int, queries: int) -> None:
        cfg = self.config
        seeds = eval_seeds(cfg.seed, iteration, cfg.eval_episodes)
        mean, std, scores = evaluate(self.env, self.model, ensemble,
                                     cfg.resolved_eval_planner(),
                                     cfg.eval_len, seeds)
        self.curve.append(CurvePoint(queries, mean, std, iteration))
        self._event(event="eval", iteration=iteration, queries=queries,
                    mean=mean, std=std, episodes=scores)
        if self.writer:
            self.writer.write_checkpoint(ensemble, iteration)
            self.writer.write_curve(self.curve)

    def _collect_batch(self, ensemble: Ensemble, iteration: int,
                       shrinkage: float = 1.0) -> PreferenceBatch:
        cfg = self.config
        decisions_log = []
        batch = None
        stalled = 0
        attempt = 0
        unanimous = shrinkage == 0.0
        while True:
            # When the ensemble is unanimous on the whole buffer and a
            # fresh-trajectory round adds nothing, further regeneration
            # cannot help; go straight to the degraded top-up.
            exhausted = attempt >= cfg.max_regen or (unanimous and stalled >= 2)
            override = -1.0 if exhausted else None
            before = len(self.carry) if self.carry else 0
            try:
                batch, decisions = assemble_batch(
                    self.buffer, self.model, ensemble, cfg.query, self.oracle,
                    self.rng_query, iteration, self.qid, carry=self.carry,
                    threshold_override=override)
                decisions_log += decisions
                self.carry = None
                if override is not None:
                    self.degraded_batches += 1
                    self._event(event="degraded_batch", iteration=iteration)
                break
            except PartialBatchError as err:
                stalled = stalled + 1 if len(err.accepted) == before else 0
                self.carry = err.accepted
                decisions_log += err.decisions
                self._event(event="batch_stalled", iteration=iteration,
                            accepted=len(err.accepted), attempt=attempt)
                self._generate(ensemble, iteration, 1)
                attempt += 1
        for d in decisions_log:
            self._event(event="query", query_id=d.query_id,
                        score=round(d.score, 6), accepted=d.accepted,
                        seg0=d.seg_ids[0], seg1=d.seg_ids[1])
        return batch

    # -- main loop ----------------------------------------------------------

    def step(self) -> None:
        """One full iteration: sample learner ensemble, generate, query, cut."""
        import time as _time
        cfg = self.config
        i = self.iteration
        self._phase("optimizing", i)
        t0 = _time.time()
        ensemble, info = self.learner.ensemble(self.history, i)
        t_sample = _time.time() - t0
        if info.get("degraded"):
            self.degraded_sampler += 1
        self._event(event="iteration", iteration=i, **{
            k: v for k, v in info.items()})
        t_eval = 0.0
        if i % cfg.checkpoint_every == 0:
            self._phase("evaluating", i)
            t0 = _time.time()
            self._checkpoint(ensemble, i, queries=cfg.query.batch_size * i)
            t_eval = _time.time() - t0
        self._phase("collecting", i)
        t0 = _time.time()
        self._generate(ensemble, i, cfg.traj_per_iteration)
        t_gen = _time.time() - t0
        shrink = disagreement_fraction(
            self.buffer, self.model, ensemble,
            cfg.query.disagreement_threshold, self.rng_stats)
        self._event(event="shrinkage", iteration=i, fraction=shrink)
        t0 = _time.time()
        batch = self._collect_batch(ensemble, i, shrinkage=shrink)
        t_query = _time.time() - t0
        self.history.append(batch)
        if self.writer:
            for rec in batch.records:
                self.writer.append_record(rec, batch.batch_index)
        t0 = _time.time()
        update_info = self.learner.update(self.history)
        t_update = _time.time() - t0
        if update_info:
            self._event(event="learner_update", iteration=i, **update_info)
        self._event(event="timing", iteration=i,
                    sample_s=round(t_sample, 2), eval_s=round(t_eval, 2),
                    generate_s=round(t_gen, 2), query_s=round(t_query, 2),
                    update_s=round(t_update, 2))
        self.iteration += 1

    def finish(self) -> RunResult:
        cfg = self.config
        ensemble, info = self.learner.ensemble(self.history, self.iteration)
        if info.get("degraded"):
            self.degraded_sampler += 1
        if cfg.iterations > 0:
            self._checkpoint(ensemble, self.iteration,
                             queries=cfg.query.batch_size * self.iteration)
        degraded = self.degraded_sampler > 0 or self.degraded_batches > 0
        result = RunResult(ensemble=ensemble, curve=self.curve,
                           history=self.history, events=self.events,
                           degraded=degraded, out_dir=cfg.out_dir,
                           degraded_sampler=self.degraded_sampler,
                           degraded_batches=self.degraded_batches,
                           learner=getattr(self.learner, "learner", None))
        if self.writer:
            final = self.curve.points[-1] if len(self.curve) else None
            self.writer.write_summary({
                "learner": self.learner.name,
                "iterations": self.iteration,
                "queries": cfg.query.batch_size * self.iteration,
                "degraded_sampler_iterations": self.degraded_sampler,
                "degraded_batches": self.degraded_batches,
                "final_mean": final.mean if final else None,
                "final_std": final.std if final else None,
            })
        return result

    def run(self) -> RunResult:
        while self.iteration < self.config.iterations:
            self.step()
        return self.finish()


def run_hsbc(config: RunConfig, oracle=None) -> RunResult:
    """Full hypothesis-space batch-cutting run."""
    return RunLoop(config, CutLearner, oracle=oracle).run()


def run_bt_baseline(config: RunConfig, oracle=None) -> RunResult:
    """Bradley-Terry baseline run on the identical data path."""
    return RunLoop(config, BaselineLearner, oracle=oracle).run()


# ---------------------------------------------------------------------------
# presets


def pointmass_config(false_rate: float = 0.0, gamma: float = 0.0,
                     seed: int = 0, oracle_kind: str | None = None,
                     model_kind: str = "linear", **overrides) -> RunConfig:
    """Fast linear-task preset for lemma, recovery, and robustness runs."""
    if oracle_kind is None:
        oracle_kind = "rational" if false_rate == 0.0 else "batch-flip"
    cfg = RunConfig(
        env=EnvSpec(kind="pointmass", dt=0.1, init_noise=0.3, ep_len=60),
        model={"kind": model_kind},
        sampler=SamplerConfig(ensemble_size=16, step_size=0.01, steps=1000,
                              weight_decay=0.001, sharpen_factor=100.0,
                              smoothing=SmoothingConfig(alpha=1.0, beta=3.0)),
        query=QueryConfig(batch_size=10, disagreement_threshold=0.75,
                          segments_per_trajectory=2),
        planner=PlannerConfig(num_samples=64, horizon=15, lam=0.01, std=1.0),
        eval_planner=PlannerConfig(num_samples=64, horizon=15, lam=0.01,
                                   std=0.75, explore=False),
        oracle=OracleSpec(kind=oracle_kind, rate=false_rate),
        gamma=gamma,
        iterations=20, traj_len=60, seg_len=20, eval_len=100,
        bootstrap_iterations=1, traj_per_iteration=2, checkpoint_every=5,
        seed=seed)
    return replace(cfg, **overrides)


def cartpole_config(false_rate: float = 0.0, gamma: float = 0.0,
                    seed: int = 0, oracle_kind: str | None = None,
                    **overrides) -> RunConfig:
    """Desk-scaled swing-up preset (training-column MPPI, small MLP)."""
    if oracle_kind is None:
        oracle_kind = "rational" if false_rate == 0.0 else "batch-flip"
    cfg = RunConfig(
        env=EnvSpec(kind="cartpole", dt=0.01, substeps=5, init_noise=0.01,
                    ep_len=100),
        model={"kind": "mlp", "hidden": [32, 32], "activation": "tanh",
               "squash": True},
        sampler=SamplerConfig(ensemble_size=16, step_size=0.01, steps=200,
                              weight_decay=0.001, soften_factor=20.0,
                              sharpen_factor=10.0,
                              smoothing=SmoothingConfig(alpha=10.0, beta=3.0)),
        query=QueryConfig(batch_size=10, disagreement_threshold=0.75,
                          segments_per_trajectory=2),
        planner=PlannerConfig(num_samples=256, horizon=20, lam=0.01, std=1.0),
        eval_planner=PlannerConfig(num_samples=256, horizon=20, lam=0.01,
                                   std=0.75, explore=False),
        oracle=OracleSpec(kind=oracle_kind, rate=false_rate),
        baseline=BaselineConfig(alpha_base=10.0),
        gamma=gamma,
        iterations=30, traj_len=100, seg_len=50, eval_len=200,
        bootstrap_iterations=3, traj_per_iteration=2, checkpoint_every=5,
        seed=seed)
    return replace(cfg, **overrides)


PRESETS = {"pointmass": pointmass_config, "cartpole": cartpole_config}
