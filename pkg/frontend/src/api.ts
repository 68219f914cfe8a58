/**
 * Typed client for the preview service. The wire contract is consumed
 * verbatim; the UI never re-derives counts or masks on its own.
 */

export interface SliderParams {
  redLo: number;
  redHi: number;
  greenLo: number;
  greenHi: number;
}

/** [row, startColumn, runLength] triples encoding the marked mask. */
export type Span = [number, number, number];

export interface PreviewResponse {
  count: number;
  densityPer100Um: number | null;
  dendriteLengthUm: number | null;
  spans: Span[];
  params: SliderParams;
}

export interface RoiResponse {
  vertices: [number, number][];
  band_width: number;
  lengthUm: number | null;
}

export interface FinalizeResponse extends PreviewResponse {
  reportPath: string;
  imagePath: string;
}

export interface ApiError {
  code: string;
  message: string;
}

export class ServiceError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    const err = body as ApiError;
    throw new ServiceError(response.status, err.code ?? "unknown", err.message ?? "request failed");
  }
  return body as T;
}

export class PreviewClient {
  constructor(private baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  async createSession(red: Blob, green: Blob, calib?: number): Promise<string> {
    const form = new FormData();
    form.append("red", red, "red.pgm");
    form.append("green", green, "green.pgm");
    if (calib !== undefined) form.append("calib", String(calib));
    const response = await this.fetchFn(`${this.baseUrl}/sessions`, { method: "POST", body: form });
    const body = await parseOrThrow<{ id: string }>(response);
    return body.id;
  }

  async setRoi(sessionId: string, vertices: [number, number][], bandWidth: number): Promise<RoiResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/roi`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ vertices, band_width: bandWidth }),
    });
    return parseOrThrow<RoiResponse>(response);
  }

  async preview(sessionId: string, params: SliderParams): Promise<PreviewResponse> {
    const query = new URLSearchParams({
      redLo: String(params.redLo),
      redHi: String(params.redHi),
      greenLo: String(params.greenLo),
      greenHi: String(params.greenHi),
    });
    const response = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/preview?${query}`);
    return parseOrThrow<PreviewResponse>(response);
  }

  async finalize(sessionId: string): Promise<FinalizeResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/finalize`, { method: "POST" });
    return parseOrThrow<FinalizeResponse>(response);
  }
}
