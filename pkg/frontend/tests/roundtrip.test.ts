// Scripted client drives a live human-mode cartpole session end to end:
// every submitted label must land in the preference log with its query_id,
// and a duplicate submission must be rejected (exactly-once semantics).

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { SessionApi } from "../src/api.js";

const PY = process.env.PREFCUT_PYTHON ?? "python3";
const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

const CONFIG_SNIPPET = `
import json
from dataclasses import replace
from prefcut import OracleSpec, cartpole_config

cfg = cartpole_config(seed=0)
cfg = replace(
    cfg,
    oracle=OracleSpec(kind="human"),
    sampler=replace(cfg.sampler, ensemble_size=4, steps=30),
    query=replace(cfg.query, batch_size=10, disagreement_threshold=0.05,
                  max_candidate_draws=600),
    planner=replace(cfg.planner, num_samples=8, horizon=4),
    eval_planner=replace(cfg.eval_planner, num_samples=8, horizon=4),
    iterations=1, traj_len=24, seg_len=8, eval_len=10, eval_episodes=1,
    checkpoint_every=100, bootstrap_iterations=1, bootstrap_labels=0)
print(json.dumps(cfg.to_dict()))
`;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

describe("labeling round trip against the live service", () => {
  let proc: ChildProcess;
  let outDir: string;
  const api = new SessionApi(BASE);

  beforeAll(async () => {
    outDir = mkdtempSync(join(tmpdir(), "prefcut-ui-"));
    const gen = spawnSync(PY, ["-c", CONFIG_SNIPPET], { encoding: "utf-8" });
    expect(gen.status, gen.stderr).toBe(0);
    const cfgPath = join(outDir, "config.json");
    writeFileSync(cfgPath, gen.stdout);
    proc = spawn(PY, [
      "-m", "prefcut.cli", "serve",
      "--config", cfgPath,
      "--out", join(outDir, "session"),
      "--port", String(PORT),
    ], { stdio: ["ignore", "pipe", "pipe"] });
    // wait until the service answers
    for (let i = 0; i < 100; i += 1) {
      try {
        await api.status();
        return;
      } catch {
        await sleep(200);
      }
    }
    throw new Error("service never came up");
  }, 60_000);

  afterAll(() => {
    proc?.kill("SIGINT");
  });

  async function waitForQuery(timeoutMs = 60_000) {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      const q = await api.query();
      if (q.pending !== null) return q.pending;
      await sleep(100);
    }
    throw new Error("no pending query");
  }

  it(
    "labels one full batch with exactly-once semantics",
    async () => {
      const submitted: Array<{ qid: number; label: 0 | 1 }> = [];
      let duplicateChecked = false;

      for (let k = 0; k < 10; k += 1) {
        const q = await waitForQuery();
        expect(q.left.states.length).toBe(q.right.states.length);
        const label = (k % 2) as 0 | 1;
        const first = await api.submitLabel(q.query_id, label);
        expect(first.ok).toBe(true);
        submitted.push({ qid: q.query_id, label });

        if (!duplicateChecked) {
          // duplicate submission for the same query must conflict
          const dup = await api.submitLabel(q.query_id, 1);
          expect(dup.ok).toBe(false);
          expect(dup.conflict).toBe(true);
          duplicateChecked = true;
        }
        // wait until this query is no longer pending
        const deadline = Date.now() + 30_000;
        while (Date.now() < deadline) {
          const now = await api.query();
          if (now.pending === null || now.pending.query_id !== q.query_id) {
            break;
          }
          await sleep(50);
        }
      }
      expect(duplicateChecked).toBe(true);

      // batch complete: the log must contain every label with its query_id
      const deadline = Date.now() + 120_000;
      let lines: string[] = [];
      while (Date.now() < deadline) {
        try {
          lines = readFileSync(join(outDir, "session", "preferences.jsonl"),
            "utf-8").trim().split("\n").filter((l) => l.length > 0);
          if (lines.length >= 10) break;
        } catch {
          // log not written yet
        }
        await sleep(200);
      }
      expect(lines.length).toBe(10);
      const byId = new Map(
        lines.map((l) => {
          const rec = JSON.parse(l) as {
            query_id: number; label: number; source: string;
          };
          return [rec.query_id, rec];
        }),
      );
      for (const { qid, label } of submitted) {
        const rec = byId.get(qid);
        expect(rec, `query ${qid} missing from log`).toBeDefined();
        expect(rec!.label).toBe(label);
        expect(rec!.source).toBe("human");
      }
    },
    240_000,
  );
});
