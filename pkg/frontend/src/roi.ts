/**
 * The dendrite trace being edited: vertices in image coordinates plus the
 * band half-width. Editable until the session is finalized.
 */

export interface RoiDraft {
  vertices: [number, number][];
  bandWidth: number;
}

export function emptyRoi(bandWidth = 4): RoiDraft {
  return { vertices: [], bandWidth };
}

export function addVertex(roi: RoiDraft, x: number, y: number): RoiDraft {
  return { ...roi, vertices: [...roi.vertices, [x, y]] };
}

export function undoVertex(roi: RoiDraft): RoiDraft {
  return { ...roi, vertices: roi.vertices.slice(0, -1) };
}

/** A polyline needs at least two vertices before it can be submitted. */
export function canSubmit(roi: RoiDraft): boolean {
  return roi.vertices.length >= 2;
}

export function arcLengthPx(roi: RoiDraft): number {
  let total = 0;
  for (let i = 1; i < roi.vertices.length; i++) {
    const [x0, y0] = roi.vertices[i - 1];
    const [x1, y1] = roi.vertices[i];
    total += Math.hypot(x1 - x0, y1 - y0);
  }
  return total;
}

export function lengthMicrons(roi: RoiDraft, micronsPerPixel: number): number {
  return arcLengthPx(roi) * micronsPerPixel;
}

/** Serialize to the service/CLI ROI file schema. */
export function roiToJson(roi: RoiDraft): string {
  return JSON.stringify({ vertices: roi.vertices, band_width: roi.bandWidth });
}

export function roiFromJson(text: string): RoiDraft {
  const data = JSON.parse(text) as { vertices: [number, number][]; band_width?: number };
  if (!Array.isArray(data.vertices)) throw new Error("ROI JSON needs a vertices list");
  return {
    vertices: data.vertices.map(([x, y]) => [x, y]),
    bandWidth: data.band_width ?? 4,
  };
}
