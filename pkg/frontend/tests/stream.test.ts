import { describe, expect, it } from "vitest";

import { EventStream, SseDecoder } from "../src/stream.js";
import type { ConnectionStatus, LinkEvent } from "../src/types.js";

function sse(seq: number, kind: string, t: number, data: object): string {
  const body = JSON.stringify({ seq, kind, t_sim: t, data });
  return `id: ${seq}\ndata: ${body}\n\n`;
}

const END = `event: end\ndata: {"state": "done"}\n\n`;

describe("SseDecoder", () => {
  it("reassembles messages split across arbitrary chunks", () => {
    const d = new SseDecoder();
    const text = sse(0, "char", 1.0, { rx: 0 });
    const out = [
      ...d.push(text.slice(0, 7)),
      ...d.push(text.slice(7, 21)),
      ...d.push(text.slice(21)),
    ];
    expect(out).toHaveLength(1);
    expect(out[0].id).toBe("0");
    expect(JSON.parse(out[0].data).kind).toBe("char");
  });

  it("handles several messages in one chunk and crlf endings", () => {
    const d = new SseDecoder();
    const chunk =
      sse(0, "sample", 0.1, { v: 1 }) +
      sse(1, "sample", 0.2, { v: 2 }).replace(/\n/g, "\r\n");
    const out = d.push(chunk);
    expect(out.map((m) => m.id)).toEqual(["0", "1"]);
  });

  it("parses the closing marker's event name", () => {
    const d = new SseDecoder();
    const out = d.push(END);
    expect(out[0].event).toBe("end");
    expect(JSON.parse(out[0].data).state).toBe("done");
  });

  it("ignores incomplete trailing data until terminated", () => {
    const d = new SseDecoder();
    expect(d.push("data: {\"x\"")).toHaveLength(0);
    expect(d.push(": 1}\n\n")).toHaveLength(1);
  });
});

function bodyFrom(...parts: string[]): ReadableStream<Uint8Array> {
  const enc = new TextEncoder();
  return new ReadableStream({
    start(controller) {
      for (const p of parts) {
        controller.enqueue(enc.encode(p));
      }
      controller.close();
    },
  });
}

function collect(
  baseUrl: string,
  fetchFn: typeof fetch,
): Promise<{ events: LinkEvent[]; statuses: ConnectionStatus[]; end: string }> {
  return new Promise((resolve, reject) => {
    const events: LinkEvent[] = [];
    const statuses: ConnectionStatus[] = [];
    const stream = new EventStream(baseUrl, "s1", {
      onEvent: (ev) => events.push(ev),
      onStatus: (s) => statuses.push(s),
      onEnd: (state) => resolve({ events, statuses, end: state }),
    }, fetchFn);
    stream.start(0);
    setTimeout(() => reject(new Error("stream never ended")), 5000);
  });
}

describe("EventStream", () => {
  it("delivers events in order and reports the final state", async () => {
    const fetchFn: typeof fetch = async () =>
      new Response(bodyFrom(
        sse(0, "spray", 2.0, { tx: 0 }),
        sse(1, "char", 39.1, { rx: 0, index: 0, char: "a" }),
        END,
      ));
    const got = await collect("", fetchFn);
    expect(got.events.map((e) => e.seq)).toEqual([0, 1]);
    expect(got.end).toBe("done");
    expect(got.statuses).toEqual(["connecting", "live", "ended"]);
  });

  it("resumes from the next unseen seq after a mid-stream drop", async () => {
    const urls: string[] = [];
    let call = 0;
    const fetchFn: typeof fetch = async (url) => {
      urls.push(String(url));
      call += 1;
      if (call === 1) {
        // first connection dies after three events, no end marker
        return new Response(bodyFrom(
          sse(0, "sample", 0.1, { rx: 0, v: 1 }),
          sse(1, "sample", 0.2, { rx: 1, v: 2 }),
          sse(2, "char", 39.1, { rx: 0, index: 0, char: "a" }),
        ));
      }
      return new Response(bodyFrom(
        sse(3, "char", 39.1, { rx: 1, index: 0, char: "b" }),
        END,
      ));
    };
    const got = await collect("", fetchFn);
    expect(got.events.map((e) => e.seq)).toEqual([0, 1, 2, 3]);
    expect(urls[0]).toContain("from=0");
    expect(urls[1]).toContain("from=3");
    expect(got.statuses).toContain("reconnecting");
    expect(got.end).toBe("done");
  });

  it("retries a failed connection attempt", async () => {
    let call = 0;
    const fetchFn: typeof fetch = async () => {
      call += 1;
      if (call === 1) {
        return new Response("busy", { status: 503 });
      }
      return new Response(bodyFrom(sse(0, "spray", 2.0, { tx: 0 }), END));
    };
    const got = await collect("", fetchFn);
    expect(got.events).toHaveLength(1);
    expect(call).toBe(2);
  });

  it("close() stops reconnect attempts", async () => {
    let calls = 0;
    const fetchFn: typeof fetch = async () => {
      calls += 1;
      return new Response(bodyFrom(sse(0, "spray", 2.0, { tx: 0 })));
    };
    const stream = new EventStream("", "s1", { onEvent: () => {} }, fetchFn);
    stream.start(0);
    await new Promise((r) => setTimeout(r, 100));
    stream.close();
    const before = calls;
    await new Promise((r) => setTimeout(r, 1200));
    expect(calls).toBe(before);
  });
});
