// Server-sent-events client for the session event stream. Hand-rolled
// over fetch so the same code runs in the browser and under the test
// runner; EventSource would also lose the custom resume logic (the
// service resumes from an explicit `from` query, not Last-Event-ID).

import type { ConnectionStatus, LinkEvent } from "./types.js";

export interface StreamHandlers {
  onEvent: (ev: LinkEvent) => void;
  onStatus?: (status: ConnectionStatus) => void;
  onEnd?: (state: string) => void;
}

interface SseMessage {
  event: string;
  data: string;
  id: string | null;
}

/** Parse one SSE block (the lines between blank-line separators). */
function parseBlock(block: string): SseMessage | null {
  let event = "message";
  let id: string | null = null;
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("data:")) {
      data.push(line.slice(5).trimStart());
    } else if (line.startsWith("event:")) {
      event = line.slice(6).trim();
    } else if (line.startsWith("id:")) {
      id = line.slice(3).trim();
    }
  }
  if (data.length === 0) {
    return null;
  }
  return { event, data: data.join("\n"), id };
}

/** Incremental SSE decoder; feed it chunks, get complete messages out. */
export class SseDecoder {
  private pending = "";

  push(chunk: string): SseMessage[] {
    this.pending += chunk.replace(/\r\n/g, "\n");
    const out: SseMessage[] = [];
    for (;;) {
      const cut = this.pending.indexOf("\n\n");
      if (cut < 0) {
        break;
      }
      const block = this.pending.slice(0, cut);
      this.pending = this.pending.slice(cut + 2);
      const msg = parseBlock(block);
      if (msg) {
        out.push(msg);
      }
    }
    return out;
  }
}

const RETRY_BASE_MS = 500;
const RETRY_MAX_MS = 10_000;

export class EventStream {
  private controller: AbortController | null = null;
  private closed = false;
  private retryMs = RETRY_BASE_MS;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private nextFrom = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly handlers: StreamHandlers,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Connect and keep reconnecting (resuming) until end or close(). */
  start(from = 0): void {
    this.nextFrom = from;
    this.closed = false;
    void this.connect();
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.controller?.abort();
  }

  private status(s: ConnectionStatus): void {
    this.handlers.onStatus?.(s);
  }

  private async connect(): Promise<void> {
    this.status(this.nextFrom === 0 ? "connecting" : "reconnecting");
    this.controller = new AbortController();
    const url =
      `${this.baseUrl}/api/sessions/${this.sessionId}/events` +
      `?from=${this.nextFrom}`;
    try {
      const resp = await this.fetchFn(url, {
        signal: this.controller.signal,
        headers: { accept: "text/event-stream" },
      });
      if (!resp.ok || resp.body === null) {
        throw new Error(`stream request failed: ${resp.status}`);
      }
      this.status("live");
      this.retryMs = RETRY_BASE_MS;
      const reader = resp.body.getReader();
      const decoder = new TextDecoder();
      const sse = new SseDecoder();
      for (;;) {
        const { value, done } = await reader.read();
        if (done) {
          break;
        }
        for (const msg of sse.push(decoder.decode(value, { stream: true }))) {
          if (msg.event === "end") {
            this.closed = true;
            this.status("ended");
            const state = JSON.parse(msg.data) as { state: string };
            this.handlers.onEnd?.(state.state);
            return;
          }
          const ev = JSON.parse(msg.data) as LinkEvent;
          this.nextFrom = ev.seq + 1;
          this.handlers.onEvent(ev);
        }
      }
      // server closed without the end marker: treat as a drop
      throw new Error("stream closed early");
    } catch (err) {
      if (this.closed) {
        return;
      }
      this.status("reconnecting");
      this.timer = setTimeout(() => void this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, RETRY_MAX_MS);
      void err;
    }
  }
}
