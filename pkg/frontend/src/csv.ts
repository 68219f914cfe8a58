/** CSV export of the current report, column-compatible with the batch CLI. */

import type { PreviewResponse } from "./api.js";

export function reportToCsv(preview: PreviewResponse, bandWidth: number): string {
  const header = "count,dendrite_length_um,density_per_100um,red_lo,red_hi,green_lo,green_hi,band_width";
  const p = preview.params;
  const length = preview.dendriteLengthUm === null ? "" : String(preview.dendriteLengthUm);
  const density = preview.densityPer100Um === null ? "" : String(preview.densityPer100Um);
  const row = [preview.count, length, density, p.redLo, p.redHi, p.greenLo, p.greenHi, bandWidth].join(",");
  return `${header}\n${row}\n`;
}
