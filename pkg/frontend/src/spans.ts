/**
 * Overlay painting from the run-length spans the service returns. The
 * rendered pixels are exactly the spans, never a client-side re-threshold.
 */

import type { Span } from "./api.js";

/** Expand spans into a boolean mask (used by tests and hit-testing). */
export function spansToMask(spans: Span[], width: number, height: number): Uint8Array {
  const mask = new Uint8Array(width * height);
  for (const [row, start, length] of spans) {
    if (row < 0 || row >= height) continue;
    const from = Math.max(start, 0);
    const to = Math.min(start + length, width);
    mask.fill(1, row * width + from, row * width + to);
  }
  return mask;
}

/** Paint spans into an RGBA buffer with the given color. */
export function paintSpans(
  rgba: Uint8ClampedArray,
  width: number,
  spans: Span[],
  color: [number, number, number, number]
): void {
  for (const [row, start, length] of spans) {
    let offset = (row * width + start) * 4;
    for (let i = 0; i < length; i++) {
      rgba[offset] = color[0];
      rgba[offset + 1] = color[1];
      rgba[offset + 2] = color[2];
      rgba[offset + 3] = color[3];
      offset += 4;
    }
  }
}

/** Tint the red/green channels into one RGBA buffer (blue left for the ROI). */
export function composeChannels(
  red: Uint8Array,
  green: Uint8Array,
  width: number,
  height: number
): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    rgba[i * 4] = red[i];
    rgba[i * 4 + 1] = green[i];
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}
