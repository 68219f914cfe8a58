/**
 * UI state transitions for the live tuning loop.
 *
 * Two rules keep the display honest no matter how requests interleave:
 * responses are dropped unless their sequence number is newer than the last
 * applied one, AND unless their echoed parameters equal the sliders shown
 * right now. The count panel can therefore never show a number the service
 * did not produce for the visible parameters.
 */

import type { PreviewResponse, SliderParams } from "./api.js";

export interface TuningState {
  sliders: SliderParams;
  preview: PreviewResponse | null; // always consistent with `sliders`
  issuedSeq: number;
  appliedSeq: number;
}

export function initialState(): TuningState {
  return {
    sliders: { redLo: 0, redHi: 255, greenLo: 0, greenHi: 255 },
    preview: null,
    issuedSeq: 0,
    appliedSeq: 0,
  };
}

const LO_OF: Record<string, keyof SliderParams> = { redHi: "redLo", greenHi: "greenLo" };
const HI_OF: Record<string, keyof SliderParams> = { redLo: "redHi", greenLo: "greenHi" };

/**
 * Move one slider, clamped so lo <= hi within each channel and into [0, 255].
 * The stale preview is cleared immediately rather than shown against the
 * wrong parameters.
 */
export function moveSlider(state: TuningState, which: keyof SliderParams, value: number): TuningState {
  let v = Math.min(255, Math.max(0, Math.round(value)));
  const sliders = { ...state.sliders };
  const hiKey = HI_OF[which];
  const loKey = LO_OF[which];
  if (hiKey) v = Math.min(v, sliders[hiKey]);
  if (loKey) v = Math.max(v, sliders[loKey]);
  sliders[which] = v;
  const unchanged = sliders[which] === state.sliders[which];
  return unchanged ? state : { ...state, sliders, preview: null };
}

export function sameParams(a: SliderParams, b: SliderParams): boolean {
  return a.redLo === b.redLo && a.redHi === b.redHi && a.greenLo === b.greenLo && a.greenHi === b.greenHi;
}

/** Allocate the sequence number for a request about to be sent. */
export function issueRequest(state: TuningState): [TuningState, number] {
  const seq = state.issuedSeq + 1;
  return [{ ...state, issuedSeq: seq }, seq];
}

/**
 * Apply a preview response; returns the unchanged state for stale or
 * mismatched responses (out-of-order networks, superseded sliders).
 */
export function applyPreview(state: TuningState, seq: number, response: PreviewResponse): TuningState {
  if (seq <= state.appliedSeq) return state;
  if (!sameParams(response.params, state.sliders)) return state;
  return { ...state, preview: response, appliedSeq: seq };
}
