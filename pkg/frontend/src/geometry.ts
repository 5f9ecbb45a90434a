// Pure state -> screen-coordinate mapping for trajectory playback.
// No DOM access here: the canvas renderer and the fidelity tests share
// exactly these functions.

export interface Viewport {
  width: number;     // canvas pixels
  height: number;
  metersToPixels: number;
  groundY: number;   // screen y of the cart axle / track line
}

export const DEFAULT_VIEWPORT: Viewport = {
  width: 360,
  height: 260,
  metersToPixels: 70,
  groundY: 170,
};

// Rendered pole length in meters (rod of half-length 0.5 m).
export const POLE_LENGTH_M = 1.0;
export const CART_W = 44;
export const CART_H = 22;

export interface Point {
  x: number;
  y: number;
}

/** Screen position of the cart center for a cart at world x (meters). */
export function cartCenter(x: number, vp: Viewport): Point {
  return { x: vp.width / 2 + x * vp.metersToPixels, y: vp.groundY };
}

/**
 * Screen position of the pole tip. phi is measured from upright, so the
 * tip sits at world (x + L sin phi, L cos phi) relative to the axle, and
 * the screen y axis points down.
 */
export function poleTip(x: number, phi: number, vp: Viewport): Point {
  const axle = cartCenter(x, vp);
  return {
    x: axle.x + POLE_LENGTH_M * Math.sin(phi) * vp.metersToPixels,
    y: axle.y - POLE_LENGTH_M * Math.cos(phi) * vp.metersToPixels,
  };
}

/** Cartpole playback frame from a raw state row (x, xdot, phi, phidot). */
export function cartpoleFrame(state: number[], vp: Viewport) {
  const [x, , phi] = state;
  return { cart: cartCenter(x, vp), tip: poleTip(x, phi, vp) };
}

/** Point-mass frame from a raw state row (x, v); the target sits at 0. */
export function pointmassFrame(state: number[], vp: Viewport) {
  return {
    dot: { x: vp.width / 2 + state[0] * vp.metersToPixels, y: vp.groundY },
    target: { x: vp.width / 2, y: vp.groundY },
  };
}

/** Looping playback: which frame to show at a given wall-clock time. */
export function frameIndexAt(
  elapsedMs: number,
  frameCount: number,
  fps: number,
): number {
  if (frameCount <= 0) return 0;
  const raw = Math.floor((elapsedMs / 1000) * fps);
  return ((raw % frameCount) + frameCount) % frameCount;
}
