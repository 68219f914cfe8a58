/**
 * Minimal PGM (P2/P5) decoder so uploaded channels can be displayed without
 * asking the server to re-encode them. Matches the service's constraints:
 * 8-bit only, maxval <= 255.
 */

export interface DecodedImage {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major, length width * height
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

class Cursor {
  pos = 0;
  constructor(private data: Uint8Array) {}

  private skipSeparators(): void {
    while (this.pos < this.data.length) {
      const c = this.data[this.pos];
      if (c === 0x23) {
        // comment until end of line
        while (this.pos < this.data.length && this.data[this.pos] !== 0x0a) this.pos++;
      } else if (WHITESPACE.has(c)) {
        this.pos++;
      } else {
        return;
      }
    }
  }

  nextToken(): string {
    this.skipSeparators();
    const start = this.pos;
    while (this.pos < this.data.length && !WHITESPACE.has(this.data[this.pos])) this.pos++;
    if (start === this.pos) throw new Error(`unexpected end of PGM data at byte ${start}`);
    return new TextDecoder().decode(this.data.subarray(start, this.pos));
  }

  nextInt(what: string): number {
    const token = this.nextToken();
    const value = Number(token);
    if (!Number.isInteger(value)) throw new Error(`malformed ${what}: ${token}`);
    return value;
  }
}

export function decodePgm(data: Uint8Array): DecodedImage {
  const cur = new Cursor(data);
  const magic = cur.nextToken();
  if (magic !== "P2" && magic !== "P5") throw new Error(`unsupported magic ${magic} (want P2 or P5)`);
  const width = cur.nextInt("width");
  const height = cur.nextInt("height");
  const maxval = cur.nextInt("maxval");
  if (width < 1 || height < 1) throw new Error(`invalid dimensions ${width}x${height}`);
  if (maxval < 1 || maxval > 255) throw new Error(`unsupported maxval ${maxval}`);
  const pixels = new Uint8Array(width * height);
  if (magic === "P2") {
    for (let i = 0; i < pixels.length; i++) {
      const v = cur.nextInt("pixel value");
      if (v < 0 || v > maxval) throw new Error(`pixel value ${v} out of range`);
      pixels[i] = v;
    }
  } else {
    cur.pos += 1; // single whitespace byte after the header
    if (data.length - cur.pos < pixels.length) {
      throw new Error(`truncated raster: expected ${pixels.length} bytes, got ${data.length - cur.pos}`);
    }
    pixels.set(data.subarray(cur.pos, cur.pos + pixels.length));
  }
  return { width, height, pixels };
}
