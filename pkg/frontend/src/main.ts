// Page wiring: poll the session, render the pending pair, submit choices.
//
// Exactly-once labeling: the submit buttons disable the moment a choice is
// posted and stay disabled until a different query arrives; at most one
// label ever leaves this client per query_id.

import { PendingQuery, SessionApi } from "./api.js";
import { PlaybackPair, drawCurve } from "./playback.js";
import { DEFAULT_VIEWPORT } from "./geometry.js";

const api = new SessionApi("");

const el = (id: string) => document.getElementById(id)!;
const leftCanvas = el("left") as HTMLCanvasElement;
const rightCanvas = el("right") as HTMLCanvasElement;
const curveCanvas = el("curve") as HTMLCanvasElement;
const statusLine = el("status-line");
const progressLine = el("progress-line");
const chooseLeft = el("choose-left") as HTMLButtonElement;
const chooseRight = el("choose-right") as HTMLButtonElement;
const pauseBtn = el("pause") as HTMLButtonElement;
const scrubber = el("scrub") as HTMLInputElement;

let playback: PlaybackPair | null = null;
let currentQuery: PendingQuery | null = null;
let submittedFor: number | null = null;
let pollInFlight = false;

function setButtons(enabled: boolean): void {
  chooseLeft.disabled = !enabled;
  chooseRight.disabled = !enabled;
}

function showQuery(q: PendingQuery): void {
  currentQuery = q;
  const fps = Math.min(60, Math.max(10, 1 / q.dt / 2));
  playback = new PlaybackPair(q.env, q.left, q.right, fps);
  progressLine.textContent =
    `query #${q.query_id} · batch ${q.iteration} · ` +
    `${q.answered_in_batch}/${q.batch_size} answered`;
  setButtons(true);
}

async function submit(choice: "left" | "right"): Promise<void> {
  if (!currentQuery || submittedFor === currentQuery.query_id) return;
  submittedFor = currentQuery.query_id;
  setButtons(false);
  // left preferred -> label 0; right preferred -> label 1
  const label = choice === "left" ? 0 : 1;
  const res = await api.submitLabel(currentQuery.query_id, label as 0 | 1);
  if (!res.ok && !res.conflict) {
    statusLine.textContent = `submit failed: ${res.error ?? "unknown"}`;
    submittedFor = null; // retry allowed only for transport-level failures
    setButtons(true);
  }
}

async function poll(): Promise<void> {
  if (pollInFlight) return;
  pollInFlight = true;
  try {
    const status = await api.status();
    statusLine.textContent =
      `${status.run_id} · ${status.status} · iteration ${status.iteration} ` +
      `· ${status.answered_total} labels total`;
    const q = await api.query();
    if (q.pending === null) {
      if (currentQuery !== null) {
        currentQuery = null;
        playback = null;
        setButtons(false);
      }
      progressLine.textContent =
        q.status === "done" ? "session complete" : `${q.status}…`;
    } else if (
      currentQuery === null ||
      q.pending.query_id !== currentQuery.query_id
    ) {
      submittedFor = null;
      showQuery(q.pending);
    }
    const points = await api.curve();
    const ctx = curveCanvas.getContext("2d")!;
    drawCurve(ctx, points, curveCanvas.width, curveCanvas.height);
  } catch {
    statusLine.textContent = "service unreachable, retrying…";
  } finally {
    pollInFlight = false;
  }
}

function renderLoop(): void {
  if (playback) {
    const lctx = leftCanvas.getContext("2d")!;
    const rctx = rightCanvas.getContext("2d")!;
    const idx = playback.drawBoth(lctx, rctx);
    if (scrubber !== null && document.activeElement !== scrubber) {
      scrubber.value = String(
        Math.round((idx / Math.max(1, playback.frameCount - 1)) * 100),
      );
    }
  }
  requestAnimationFrame(renderLoop);
}

export function init(): void {
  leftCanvas.width = rightCanvas.width = DEFAULT_VIEWPORT.width;
  leftCanvas.height = rightCanvas.height = DEFAULT_VIEWPORT.height;
  chooseLeft.addEventListener("click", () => void submit("left"));
  chooseRight.addEventListener("click", () => void submit("right"));
  pauseBtn.addEventListener("click", () => {
    if (playback) {
      pauseBtn.textContent = playback.togglePause() ? "play" : "pause";
    }
  });
  scrubber.addEventListener("input", () => {
    playback?.scrubTo(Number(scrubber.value) / 100);
    pauseBtn.textContent = "play";
  });
  setButtons(false);
  setInterval(() => void poll(), 750);
  void poll();
  renderLoop();
}

init();
