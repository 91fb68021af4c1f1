// Thin wrappers over the session HTTP endpoints.

import type { LinkReport, SessionOverrides, SessionStatus } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  const body = (await resp.json()) as Record<string, unknown>;
  if (!resp.ok) {
    throw new ApiError(
      resp.status,
      String(body.error ?? "error"),
      String(body.detail ?? resp.statusText),
    );
  }
  return body as T;
}

export class Api {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => unwrap<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`).then((r) => unwrap<T>(r));
  }

  createSession(overrides: SessionOverrides = {}): Promise<SessionStatus> {
    return this.post("/api/sessions", overrides);
  }

  sendMessage(id: string, text: string): Promise<SessionStatus> {
    return this.post(`/api/sessions/${id}/message`, { text });
  }

  getStatus(id: string): Promise<SessionStatus> {
    return this.get(`/api/sessions/${id}`);
  }

  getReport(id: string): Promise<LinkReport> {
    return this.get(`/api/sessions/${id}/report`);
  }
}
