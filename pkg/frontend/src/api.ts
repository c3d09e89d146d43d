// Typed client for the session service. Uses global fetch, so the same
// code runs in the browser console and in node-driven end-to-end tests.

export interface MaskView {
  id: string;
  label: string | null;
  source: string;
  area: number;
  bbox_px: [number, number, number, number];
  rle: { w: number; h: number; counts: number[] };
}

export interface BackendCallView {
  capability: string;
  duration_s: number;
  status: string;
}

export interface HistoryEntryView {
  seq: number;
  command: Record<string, unknown> & { type: string };
  backend_calls: BackendCallView[];
  canvas_hash_before: string | null;
  canvas_hash_after: string | null;
  masks_after: string[];
  timestamp: number;
  status: string;
  error: string | null;
}

export interface SessionSummary {
  session_id: string;
  state: string;
  revision: number;
  canvas_hash: string | null;
  width: number | null;
  height: number | null;
  transcript: [string, string][];
  masks: MaskView[];
}

export interface CommandResponse {
  entry: HistoryEntryView | null;
  canvas: string | null;
  canvas_hash: string | null;
  masks: MaskView[];
  transcript: [string, string][];
}

export type CommandBody = Record<string, unknown> & { type: string };

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string | null,
  ) {
    super(`${code} (${status}): ${detail ?? ""}`);
  }
}

async function parseError(resp: Response): Promise<never> {
  let code = "http_error";
  let detail: string | null = null;
  try {
    const body = await resp.json();
    code = body.error ?? code;
    detail = body.detail ?? null;
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(resp.status, code, detail);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    // wrapped so the global fetch keeps its expected receiver in browsers
    private fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  async createSession(): Promise<string> {
    const body = await this.postJson<{ session_id: string }>("/api/sessions", {});
    return body.session_id;
  }

  uploadImage(sid: string, b64Png: string): Promise<SessionSummary> {
    return this.postJson(`/api/sessions/${sid}/image`, { image: b64Png });
  }

  command(sid: string, body: CommandBody): Promise<CommandResponse> {
    return this.postJson(`/api/sessions/${sid}/command`, body);
  }

  undo(sid: string): Promise<SessionSummary> {
    return this.postJson(`/api/sessions/${sid}/undo`, {});
  }

  summary(sid: string): Promise<SessionSummary> {
    return this.getJson(`/api/sessions/${sid}`);
  }

  history(sid: string): Promise<{ session_id: string; entries: HistoryEntryView[] }> {
    return this.getJson(`/api/sessions/${sid}/history`);
  }

  async canvasPng(sid: string): Promise<Uint8Array> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/sessions/${sid}/canvas`);
    if (!resp.ok) await parseError(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
