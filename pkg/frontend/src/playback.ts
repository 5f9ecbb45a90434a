// Synchronized looping playback of the two candidate trajectories.

import {
  DEFAULT_VIEWPORT,
  CART_H,
  CART_W,
  Viewport,
  cartpoleFrame,
  frameIndexAt,
  pointmassFrame,
} from "./geometry.js";
import type { Track } from "./api.js";

export class PlaybackPair {
  private startedAt = performance.now();
  private paused = false;
  private pausedAt = 0;
  private scrub: number | null = null;

  constructor(
    readonly env: string,
    readonly left: Track,
    readonly right: Track,
    readonly fps: number,
    readonly vp: Viewport = DEFAULT_VIEWPORT,
  ) {}

  get frameCount(): number {
    return this.left.states.length;
  }

  togglePause(): boolean {
    if (this.paused) {
      this.startedAt += performance.now() - this.pausedAt;
      this.paused = false;
    } else {
      this.pausedAt = performance.now();
      this.paused = true;
    }
    return this.paused;
  }

  /** Scrub to a fraction of the segment; resumes on togglePause. */
  scrubTo(fraction: number): void {
    this.scrub = Math.min(1, Math.max(0, fraction));
    this.paused = true;
  }

  currentFrame(now: number = performance.now()): number {
    if (this.scrub !== null && this.paused) {
      return Math.min(this.frameCount - 1,
        Math.round(this.scrub * (this.frameCount - 1)));
    }
    const t = this.paused ? this.pausedAt : now;
    return frameIndexAt(t - this.startedAt, this.frameCount, this.fps);
  }

  drawBoth(leftCtx: CanvasRenderingContext2D,
           rightCtx: CanvasRenderingContext2D): number {
    const idx = this.currentFrame();
    this.drawTrack(leftCtx, this.left, idx);
    this.drawTrack(rightCtx, this.right, idx);
    return idx;
  }

  private drawTrack(ctx: CanvasRenderingContext2D, track: Track,
                    idx: number): void {
    const vp = this.vp;
    ctx.clearRect(0, 0, vp.width, vp.height);
    ctx.strokeStyle = "#999";
    ctx.beginPath();
    ctx.moveTo(0, vp.groundY);
    ctx.lineTo(vp.width, vp.groundY);
    ctx.stroke();
    const state = track.states[Math.min(idx, track.states.length - 1)];
    if (this.env === "cartpole") {
      const f = cartpoleFrame(state, vp);
      ctx.fillStyle = "#2b6cb0";
      ctx.fillRect(f.cart.x - CART_W / 2, f.cart.y - CART_H / 2, CART_W,
        CART_H);
      ctx.strokeStyle = "#c05621";
      ctx.lineWidth = 5;
      ctx.beginPath();
      ctx.moveTo(f.cart.x, f.cart.y);
      ctx.lineTo(f.tip.x, f.tip.y);
      ctx.stroke();
      ctx.lineWidth = 1;
      ctx.fillStyle = "#c05621";
      ctx.beginPath();
      ctx.arc(f.tip.x, f.tip.y, 6, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      const f = pointmassFrame(state, vp);
      ctx.strokeStyle = "#38a169";
      ctx.beginPath();
      ctx.moveTo(f.target.x, f.target.y - 12);
      ctx.lineTo(f.target.x, f.target.y + 12);
      ctx.stroke();
      ctx.fillStyle = "#2b6cb0";
      ctx.beginPath();
      ctx.arc(f.dot.x, f.dot.y, 9, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

/** Minimal line chart of the learning curve on a canvas. */
export function drawCurve(
  ctx: CanvasRenderingContext2D,
  points: { queries: number; mean: number }[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (points.length === 0) return;
  const xs = points.map((p) => p.queries);
  const ys = points.map((p) => p.mean);
  const x0 = Math.min(...xs), x1 = Math.max(...xs, x0 + 1);
  const y0 = Math.min(...ys), y1 = Math.max(...ys, y0 + 1e-9);
  const px = (q: number) => 8 + ((q - x0) / (x1 - x0)) * (width - 16);
  const py = (v: number) => height - 8 - ((v - y0) / (y1 - y0)) * (height - 16);
  ctx.strokeStyle = "#2b6cb0";
  ctx.beginPath();
  points.forEach((p, i) => {
    if (i === 0) ctx.moveTo(px(p.queries), py(p.mean));
    else ctx.lineTo(px(p.queries), py(p.mean));
  });
  ctx.stroke();
  ctx.fillStyle = "#2b6cb0";
  for (const p of points) {
    ctx.beginPath();
    ctx.arc(px(p.queries), py(p.mean), 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}
