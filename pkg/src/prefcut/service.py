"""Human-in-the-loop session service.

Runs a learning loop in a worker thread with an oracle that parks each
disagreement-gated query until a label arrives over HTTP. The wire format
is versioned JSON over a local TCP socket; trajectory data ships as plain
numeric arrays so any client can render playback.

Endpoints:
  GET  /status  -> session progress and state machine status
  GET  /query   -> the pending query (segment pair + playback arrays) or null
  POST /label   -> {"query_id": int, "label": 0|1}; conflict on duplicates
  GET  /curve   -> learning-curve points
  GET  /...     -> optional static UI files

Accepted labels are persisted as they arrive, and a snapshot is written at
every iteration boundary, so a killed session resumes without losing any
accepted preference.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .cutting import BatchHistory, PreferenceBatch, PreferenceRecord
from .harness import (CurvePoint, CutLearner, IdCounter, RunConfig, RunLoop,
                      RunWriter, _segment_to_json, segment_from_json)
from .oracles import OracleSpec, SimulatedOracle
from .queries import AcceptedQuery
from .rewards import InvalidInputError, Segment
from .sampling import Ensemble

WIRE_VERSION = 1


class ConflictError(RuntimeError):
    """Label submitted for a query that is not pending."""


class SessionState:
    """Thread-safe view of a live run for the HTTP handlers."""

    def __init__(self, run_id: str, batch_size: int, env_kind: str, dt: float):
        self._lock = threading.Lock()
        self.run_id = run_id
        self.batch_size = batch_size
        self.env_kind = env_kind
        self.dt = dt
        self.status = "collecting"
        self.iteration = 0
        self.answered_total = 0
        self.answered_in_batch = 0
        self.pending: dict | None = None
        self.curve_points: list[dict] = []
        self._labels: "queue.Queue[tuple[int, int]]" = queue.Queue()
        self._resolved: set[int] = set()

    # -- loop side ----------------------------------------------------------

    def set_status(self, status: str, iteration: int | None = None) -> None:
        with self._lock:
            self.status = status
            if iteration is not None:
                self.iteration = iteration

    def set_curve(self, points: list[dict]) -> None:
        with self._lock:
            self.curve_points = list(points)

    def begin_batch(self, answered: int) -> None:
        with self._lock:
            self.answered_in_batch = answered

    def park_query(self, query_id: int, seg0: Segment, seg1: Segment) -> None:
        with self._lock:
            self.pending = {"query_id": query_id,
                            "seg0": seg0, "seg1": seg1}

    def wait_for_label(self, query_id: int, stop: threading.Event) -> int:
        """Block until the label for the parked query arrives."""
        while True:
            try:
                qid, lab = self._labels.get(timeout=0.2)
            except queue.Empty:
                if stop.is_set():
                    raise InterruptedError("session stopping")
                continue
            if qid != query_id:  # stale submissions are dropped
                continue
            with self._lock:
                self.pending = None
                self._resolved.add(query_id)
                self.answered_total += 1
                self.answered_in_batch += 1
            return lab

    # -- HTTP side ----------------------------------------------------------

    def submit(self, query_id, label) -> None:
        if not isinstance(query_id, int) or label not in (0, 1):
            raise InvalidInputError("need integer query_id and label in {0, 1}")
        with self._lock:
            if query_id in self._resolved:
                raise ConflictError(f"query {query_id} already answered")
            if self.pending is None or self.pending["query_id"] != query_id:
                raise ConflictError(f"query {query_id} is not pending")
        self._labels.put((query_id, int(label)))

    def status_view(self) -> dict:
        with self._lock:
            return {"version": WIRE_VERSION, "run_id": self.run_id,
                    "status": self.status, "iteration": self.iteration,
                    "batch_size": self.batch_size,
                    "answered_total": self.answered_total,
                    "answered_in_batch": self.answered_in_batch,
                    "remaining_in_batch":
                        self.batch_size - self.answered_in_batch,
                    "pending": self.pending is not None,
                    "env": self.env_kind, "dt": self.dt}

    def query_view(self) -> dict:
        with self._lock:
            if self.pending is None:
                return {"version": WIRE_VERSION, "status": self.status,
                        "pending": None}
            seg0, seg1 = self.pending["seg0"], self.pending["seg1"]
            return {"version": WIRE_VERSION, "status": self.status,
                    "pending": {
                        "query_id": self.pending["query_id"],
                        "iteration": self.iteration,
                        "answered_in_batch": self.answered_in_batch,
                        "batch_size": self.batch_size,
                        "env": self.env_kind, "dt": self.dt,
                        "left": {"states": seg0.states.tolist(),
                                 "actions": seg0.actions.tolist()},
                        "right": {"states": seg1.states.tolist(),
                                  "actions": seg1.actions.tolist()}}}

    def curve_view(self) -> dict:
        with self._lock:
            return {"version": WIRE_VERSION, "points": list(self.curve_points)}


class HumanOracle:
    """Oracle backed by the session: parks the query and blocks for a label."""

    source = "human"

    def __init__(self, session: SessionState, stop: threading.Event,
                 on_label=None):
        self.session = session
        self.stop = stop
        self.on_label = on_label

    def label(self, seg0, seg1, query_id=None):
        self.session.park_query(query_id, seg0, seg1)
        lab = self.session.wait_for_label(query_id, self.stop)
        if self.on_label is not None:
            self.on_label(query_id, seg0, seg1, lab, None, "human")
        return lab, None

    def finalize_batch(self, labels):
        return list(labels)


class HandoffOracle:
    """Simulated labels for the first `bootstrap` queries, then human."""

    def __init__(self, sim: SimulatedOracle, human: HumanOracle,
                 bootstrap: int, issued: int = 0, on_label=None):
        self.sim = sim
        self.human = human
        self.bootstrap = bootstrap
        self.issued = issued
        self.on_label = on_label
        self.source = "simulated"

    def label(self, seg0, seg1, query_id=None):
        if self.issued < self.bootstrap:
            self.source = self.sim.source
            lab, truth = self.sim.label(seg0, seg1, query_id=query_id)
            if self.on_label is not None:
                self.on_label(query_id, seg0, seg1, lab, truth, self.source)
        else:
            self.source = self.human.source
            lab, truth = self.human.label(seg0, seg1, query_id=query_id)
        self.issued += 1
        return lab, truth

    def finalize_batch(self, labels):
        return list(labels)


# ---------------------------------------------------------------------------
# persistence of the live session


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state

def _set_rng_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


class SessionStore:
    """Snapshot + per-label journal so a killed session can resume."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def has_snapshot(self) -> bool:
        return os.path.exists(self.path("snapshot.json"))

    def has_state(self) -> bool:
        return any(os.path.exists(self.path(n)) for n in
                   ("snapshot.json", "inprogress.jsonl", "preferences.jsonl"))

    def append_inprogress(self, line: dict) -> None:
        with open(self.path("inprogress.jsonl"), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(line) + "\n")
            fh.flush()

    def clear_inprogress(self) -> None:
        open(self.path("inprogress.jsonl"), "w").close()

    def read_inprogress(self) -> list[dict]:
        p = self.path("inprogress.jsonl")
        if not os.path.exists(p):
            return []
        with open(p, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def write_snapshot(self, loop: RunLoop, oracle_issued: int) -> None:
        snap = {
            "iteration": loop.iteration,
            "next_qid": loop.qid.value,
            "next_traj": loop.traj_counter.value,
            "next_segment": loop.buffer._next_id,
            "buffer_ids": [s.segment_id for s in loop.buffer.segments],
            "oracle_issued": oracle_issued,
            "degraded_sampler": loop.degraded_sampler,
            "degraded_batches": loop.degraded_batches,
            "curve": [vars(p) for p in loop.curve.points],
            "rng": {name: _rng_state(getattr(loop, name)) for name in
                    ("rng_oracle", "rng_learn", "rng_plan", "rng_query",
                     "rng_stats")},
        }
        tmp = self.path("snapshot.json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(snap, fh, default=int)
        os.replace(tmp, self.path("snapshot.json"))
        warm = getattr(loop.learner, "warm", None)
        members = warm.members if warm is not None else np.zeros((0, 0))
        np.savez(self.path("warm.npz"), members=members)
        self.clear_inprogress()

    def read_snapshot(self) -> dict:
        with open(self.path("snapshot.json"), encoding="utf-8") as fh:
            return json.load(fh)

    def read_segments(self) -> dict[int, Segment]:
        segs: dict[int, Segment] = {}
        p = self.path("segments.jsonl")
        if os.path.exists(p):
            with open(p, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        d = json.loads(line)
                        segs[d["segment_id"]] = segment_from_json(d)
        return segs

    def read_preferences(self) -> list[dict]:
        p = self.path("preferences.jsonl")
        if not os.path.exists(p):
            return []
        with open(p, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


def restore_loop(config: RunConfig, store: SessionStore, oracle) -> tuple[RunLoop, int]:
    """Rebuild a RunLoop from the journals plus, when present, the last
    iteration-boundary snapshot. Returns (loop, labels issued at boundary)."""
    loop = RunLoop(config, CutLearner, oracle=oracle,
                   writer=RunWriter(store.out_dir))
    snap = store.read_snapshot() if store.has_snapshot() else None
    segments = store.read_segments()
    loop.writer._segments_written = set(segments.keys())

    # completed batches
    history = BatchHistory(conservativeness=config.gamma)
    by_batch: dict[int, list[dict]] = {}
    for rec in store.read_preferences():
        by_batch.setdefault(rec["batch_index"], []).append(rec)
    for bi in sorted(by_batch):
        records = [
            PreferenceRecord(seg0=segments[r["seg0"]], seg1=segments[r["seg1"]],
                             label=r["label"], query_id=r["query_id"],
                             source=r["source"], true_label=r["true_label"],
                             score=r["score"])
            for r in by_batch[bi]]
        history.append(PreferenceBatch(records=records, batch_index=bi))
    loop.history = history

    # in-progress (accepted but batch not complete)
    carry = []
    last_rng_query = None
    last_rng_oracle = None
    for line in store.read_inprogress():
        carry.append(AcceptedQuery(
            seg0=segment_from_json(line["seg0"]),
            seg1=segment_from_json(line["seg1"]),
            query_id=line["query_id"], score=line["score"],
            label=line["label"], true_label=line["true_label"],
            source=line["source"]))
        last_rng_query = line.get("rng_query") or last_rng_query
        last_rng_oracle = line.get("rng_oracle") or last_rng_oracle
    loop.carry = carry or None

    # counters and streams
    loop.iteration = len(history)
    max_qid = max(
        [r["query_id"] for b in by_batch.values() for r in b] +
        [a.query_id for a in carry] + [-1])
    max_seg = max(segments.keys(), default=-1)
    carry_max_seg = max([s.segment_id for a in carry
                         for s in (a.seg0, a.seg1)] + [-1])
    issued_at_boundary = sum(len(b) for b in by_batch.values())
    if snap is not None:
        loop.iteration = max(loop.iteration, snap["iteration"])
        loop.qid = IdCounter(max(snap["next_qid"], max_qid + 1))
        loop.traj_counter = IdCounter(snap["next_traj"])
        loop.buffer._next_id = max(snap["next_segment"], max_seg + 1,
                                   carry_max_seg + 1)
        loop.buffer.segments = [segments[i] for i in snap["buffer_ids"]
                                if i in segments]
        loop.degraded_sampler = snap.get("degraded_sampler", 0)
        loop.degraded_batches = snap.get("degraded_batches", 0)
        for name, state in snap["rng"].items():
            _set_rng_state(getattr(loop, name), state)
        for p in snap["curve"]:
            loop.curve.append(CurvePoint(**p))
        issued_at_boundary = snap["oracle_issued"]
        warm = np.load(store.path("warm.npz"))["members"]
        if warm.size:
            loop.learner.warm = Ensemble(members=warm)
    else:
        loop.qid = IdCounter(max_qid + 1)
        loop.buffer._next_id = max(max_seg, carry_max_seg) + 1
    if last_rng_query is not None:
        _set_rng_state(loop.rng_query, last_rng_query)
    if last_rng_oracle is not None:
        _set_rng_state(loop.rng_oracle, last_rng_oracle)
    return loop, issued_at_boundary


# ---------------------------------------------------------------------------
# the session runner


class SessionRunner:
    """Owns the learning loop thread and the shared session state."""

    def __init__(self, config: RunConfig, out_dir: str):
        if config.oracle.kind != "human":
            raise InvalidInputError("session service needs oracle kind 'human'")
        self.config = config
        self.store = SessionStore(out_dir)
        self.stop_event = threading.Event()
        run_id = f"{config.env.kind}-{config.seed}"
        self.session = SessionState(run_id, config.query.batch_size,
                                    config.env.kind, config.env.dt)
        self.result = None
        self.error: BaseException | None = None

        resume = self.store.has_state()
        human = HumanOracle(self.session, self.stop_event,
                            on_label=self._on_label)
        if resume:
            self.loop, issued = restore_loop(config, self.store, human)
            issued += len(self.loop.carry or [])
        else:
            self.loop = RunLoop(config, CutLearner, oracle=human,
                                writer=RunWriter(out_dir))
            issued = 0
        sim = SimulatedOracle(OracleSpec(kind="rational", seed=config.seed),
                              self.loop.env.ground_truth_reward,
                              self.loop.rng_oracle)
        self.oracle = HandoffOracle(sim, human, config.bootstrap_labels,
                                    issued=issued, on_label=self._on_label)
        self.loop.oracle = self.oracle
        self.loop.on_phase = self._on_phase
        self.session.answered_total = issued
        self.session.begin_batch(len(self.loop.carry or []))
        self.session.set_curve([vars(p) for p in self.loop.curve.points])
        self.session.set_status("collecting", self.loop.iteration)
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _on_phase(self, phase: str, iteration: int) -> None:
        self.session.set_status(phase, iteration)
        if phase == "collecting":
            self.session.begin_batch(len(self.loop.carry or []))

    def _on_label(self, query_id, seg0, seg1, label, truth, source):
        """Journal every accepted label the moment it resolves."""
        self.store.append_inprogress({
            "query_id": query_id, "label": label, "true_label": truth,
            "source": source, "score": None,
            "seg0": _segment_to_json(seg0), "seg1": _segment_to_json(seg1),
            "rng_query": _rng_state(self.loop.rng_query),
            "rng_oracle": _rng_state(self.loop.rng_oracle)})

    def _run(self):
        loop = self.loop
        try:
            while loop.iteration < self.config.iterations:
                loop.step()
                self.store.write_snapshot(loop, self.oracle.issued)
                self.session.set_curve([vars(p) for p in loop.curve.points])
            self.session.set_status("evaluating", loop.iteration)
            self.result = loop.finish()
            self.session.set_curve([vars(p) for p in loop.curve.points])
            self.session.set_status("done", loop.iteration)
        except InterruptedError:
            pass
        except BaseException as exc:   # surfaced via /status for the operator
            self.error = exc
            self.session.set_status("failed", loop.iteration)
            raise

    def start(self):
        self.thread.start()

    def shutdown(self):
        self.stop_event.set()


# ---------------------------------------------------------------------------
# HTTP layer


class _Handler(BaseHTTPRequestHandler):
    server_version = "prefcut/0.1"

    def _send(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _static(self, path: str) -> bool:
        ui_dir = self.server.ui_dir
        if ui_dir is None:
            return False
        rel = "index.html" if path in ("/", "") else path.lstrip("/")
        full = os.path.realpath(os.path.join(ui_dir, rel))
        if not full.startswith(os.path.realpath(ui_dir)) or not os.path.isfile(full):
            return False
        ctype = {"html": "text/html", "js": "text/javascript",
                 "css": "text/css", "map": "application/json"}.get(
                     full.rsplit(".", 1)[-1], "application/octet-stream")
        with open(full, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True

    def do_GET(self):
        session: SessionState = self.server.session
        path = self.path.split("?")[0]
        if path == "/status":
            self._send(200, session.status_view())
        elif path == "/query":
            self._send(200, session.query_view())
        elif path == "/curve":
            self._send(200, session.curve_view())
        elif self._static(path):
            pass
        else:
            self._send(404, {"version": WIRE_VERSION, "error": "not found"})

    def do_POST(self):
        session: SessionState = self.server.session
        if self.path.split("?")[0] != "/label":
            self._send(404, {"version": WIRE_VERSION, "error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            session.submit(payload.get("query_id"), payload.get("label"))
            self._send(200, {"version": WIRE_VERSION, "accepted": True})
        except ConflictError as exc:
            self._send(409, {"version": WIRE_VERSION, "error": str(exc)})
        except (InvalidInputError, json.JSONDecodeError, TypeError) as exc:
            self._send(400, {"version": WIRE_VERSION, "error": str(exc)})

    def log_message(self, fmt, *args):   # quiet by default
        pass


def serve_session(config: RunConfig, host: str = "127.0.0.1", port: int = 8765,
                  out_dir: str | None = None, ui_dir: str | None = None,
                  start: bool = True):
    """Build (and optionally start) the session service.

    Returns (server, runner); call server.serve_forever() to block, or use
    the returned objects from tests.
    """
    out = out_dir or config.out_dir
    if not out:
        raise InvalidInputError("session service needs an output directory")
    runner = SessionRunner(config, out)
    server = ThreadingHTTPServer((host, port), _Handler)
    server.session = runner.session
    server.ui_dir = ui_dir
    server.runner = runner
    if start:
        runner.start()
    return server, runner
