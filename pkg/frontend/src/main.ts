/**
 * Page wiring: upload the two channels, trace the dendrite, drag the range
 * sliders and watch the marked synapses repaint live. All counting happens
 * on the server; this file only moves pixels and state around.
 */

import { PreviewClient, ServiceError, type SliderParams } from "./api.js";
import { debounce } from "./debounce.js";
import { decodePgm, type DecodedImage } from "./pgm.js";
import { addVertex, canSubmit, emptyRoi, lengthMicrons, undoVertex, type RoiDraft } from "./roi.js";
import { composeChannels, paintSpans } from "./spans.js";
import { applyPreview, initialState, issueRequest, moveSlider, type TuningState } from "./state.js";
import { reportToCsv } from "./csv.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const client = new PreviewClient(
  (document.querySelector("meta[name=service-url]") as HTMLMetaElement)?.content ?? "http://127.0.0.1:8000"
);

let state: TuningState = initialState();
let sessionId: string | null = null;
let roi: RoiDraft = emptyRoi();
let roiCommitted = false;
let finalized = false;
let calib: number | undefined;
let red: DecodedImage | null = null;
let green: DecodedImage | null = null;
let baseLayer: ImageData | null = null;
let showRed = true;
let showGreen = true;

function status(message: string): void {
  $("status").textContent = message;
}

async function readChannel(input: HTMLInputElement): Promise<DecodedImage> {
  const file = input.files?.[0];
  if (!file) throw new Error("choose both channel files first");
  return decodePgm(new Uint8Array(await file.arrayBuffer()));
}

function redrawBase(): void {
  if (!red || !green) return;
  const { width, height } = red;
  const canvas = $("view") as unknown as HTMLCanvasElement;
  canvas.width = width;
  canvas.height = height;
  const zero = new Uint8Array(width * height);
  const rgba = composeChannels(showRed ? red.pixels : zero, showGreen ? green.pixels : zero, width, height);
  baseLayer = new ImageData(rgba, width, height);
  repaint();
}

function repaint(): void {
  if (!baseLayer || !red) return;
  const canvas = $("view") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const frame = new ImageData(new Uint8ClampedArray(baseLayer.data), red.width, red.height);
  if (state.preview) {
    paintSpans(frame.data, red.width, state.preview.spans, [255, 255, 255, 255]);
  }
  ctx.putImageData(frame, 0, 0);
  // ROI polyline on top, the hand-traced blue layer
  if (roi.vertices.length > 0) {
    ctx.strokeStyle = "rgba(80, 140, 255, 0.9)";
    ctx.lineWidth = Math.max(roi.bandWidth * 2, 2);
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    ctx.moveTo(roi.vertices[0][0], roi.vertices[0][1]);
    for (const [x, y] of roi.vertices.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  }
}

function updatePanel(): void {
  const preview = state.preview;
  $("count").textContent = preview ? String(preview.count) : "–";
  $("density").textContent =
    preview && preview.densityPer100Um !== null ? preview.densityPer100Um.toFixed(3) : "–";
  const um = calib !== undefined ? lengthMicrons(roi, calib).toFixed(1) + " um" : `${roi.vertices.length} pts`;
  $("roi-info").textContent = roiCommitted ? `committed (${um})` : `editing (${um})`;
  for (const key of ["redLo", "redHi", "greenLo", "greenHi"] as (keyof SliderParams)[]) {
    ($(key) as unknown as HTMLInputElement).value = String(state.sliders[key]);
    $(`${key}-val`).textContent = String(state.sliders[key]);
  }
  ($("export") as unknown as HTMLButtonElement).disabled = !preview;
  ($("finalize") as unknown as HTMLButtonElement).disabled = !roiCommitted || finalized;
}

async function requestPreview(): Promise<void> {
  if (!sessionId) return;
  const [next, seq] = issueRequest(state);
  state = next;
  const params = { ...state.sliders };
  try {
    const response = await client.preview(sessionId, params);
    state = applyPreview(state, seq, response);
  } catch (err) {
    reportError(err);
  }
  updatePanel();
  repaint();
}

const schedulePreview = debounce(() => void requestPreview(), 150);

function reportError(err: unknown): void {
  if (err instanceof ServiceError) status(`service error ${err.status} (${err.code}): ${err.message}`);
  else status(String(err));
}

function onSlider(which: keyof SliderParams, value: number): void {
  const next = moveSlider(state, which, value);
  if (next === state) return;
  state = next;
  updatePanel();
  repaint();
  schedulePreview();
}

async function createSession(): Promise<void> {
  try {
    red = await readChannel($("red-file") as unknown as HTMLInputElement);
    green = await readChannel($("green-file") as unknown as HTMLInputElement);
    const calibRaw = ($("calib") as unknown as HTMLInputElement).value.trim();
    calib = calibRaw ? Number(calibRaw) : undefined;
    const redFile = ($("red-file") as unknown as HTMLInputElement).files![0];
    const greenFile = ($("green-file") as unknown as HTMLInputElement).files![0];
    sessionId = await client.createSession(redFile, greenFile, calib);
    roi = emptyRoi(Number(($("band-width") as unknown as HTMLInputElement).value) || 4);
    roiCommitted = false;
    finalized = false;
    state = initialState();
    redrawBase();
    updatePanel();
    status(`session ${sessionId.slice(0, 8)}… created; click the image to trace the dendrite`);
    schedulePreview();
  } catch (err) {
    reportError(err);
  }
}

async function commitRoi(): Promise<void> {
  if (!sessionId || !canSubmit(roi)) {
    status("trace at least two points first");
    return;
  }
  try {
    const echoed = await client.setRoi(sessionId, roi.vertices, roi.bandWidth);
    roiCommitted = JSON.stringify(echoed.vertices) === JSON.stringify(roi.vertices);
    status(
      roiCommitted
        ? `ROI committed${echoed.lengthUm !== null ? `, ${echoed.lengthUm.toFixed(1)} um` : ""}`
        : "ROI echo mismatch; not committed"
    );
    state = { ...state, preview: null };
    updatePanel();
    schedulePreview();
  } catch (err) {
    reportError(err);
  }
}

async function finalize(): Promise<void> {
  if (!sessionId) return;
  try {
    const result = await client.finalize(sessionId);
    finalized = true;
    status(`report saved to ${result.reportPath}`);
    updatePanel();
  } catch (err) {
    reportError(err);
  }
}

function exportCsv(): void {
  if (!state.preview) return;
  const blob = new Blob([reportToCsv(state.preview, roi.bandWidth)], { type: "text/csv" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = "synapse-report.csv";
  link.click();
  URL.revokeObjectURL(link.href);
}

export function wirePage(): void {
  $("create").addEventListener("click", () => void createSession());
  $("commit-roi").addEventListener("click", () => void commitRoi());
  $("finalize").addEventListener("click", () => void finalize());
  $("export").addEventListener("click", exportCsv);
  $("undo").addEventListener("click", () => {
    if (finalized) return;
    roi = undoVertex(roi);
    updatePanel();
    repaint();
  });
  const canvas = $("view") as unknown as HTMLCanvasElement;
  canvas.addEventListener("click", (event) => {
    if (!sessionId || finalized) return;
    const rect = canvas.getBoundingClientRect();
    const x = ((event.clientX - rect.left) / rect.width) * canvas.width;
    const y = ((event.clientY - rect.top) / rect.height) * canvas.height;
    roi = addVertex(roi, Math.round(x * 4) / 4, Math.round(y * 4) / 4);
    updatePanel();
    repaint();
  });
  for (const key of ["redLo", "redHi", "greenLo", "greenHi"] as (keyof SliderParams)[]) {
    ($(key) as unknown as HTMLInputElement).addEventListener("input", (event) => {
      onSlider(key, Number((event.target as HTMLInputElement).value));
    });
  }
  ($("show-red") as unknown as HTMLInputElement).addEventListener("change", (event) => {
    showRed = (event.target as HTMLInputElement).checked;
    redrawBase();
  });
  ($("show-green") as unknown as HTMLInputElement).addEventListener("change", (event) => {
    showGreen = (event.target as HTMLInputElement).checked;
    redrawBase();
  });
  updatePanel();
}

if (typeof document !== "undefined" && document.getElementById("view")) {
  wirePage();
}
