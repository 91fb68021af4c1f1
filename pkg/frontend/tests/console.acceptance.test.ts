// End-to-end fidelity check against the real service: replay a MIMO
// "abcdef" session, drop the stream mid-transmission, resume, and
// compare what the console would display with the report endpoint.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { ConsoleState } from "../src/state.js";
import { EventStream } from "../src/stream.js";
import type { LinkEvent, LinkReport } from "../src/types.js";

const PORT = 18700 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function serviceUp(): Promise<boolean> {
  try {
    const r = await fetch(`${BASE}/api/sessions`);
    return r.ok;
  } catch {
    return false;
  }
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "molmimo.cli", "serve", "--port",
                             String(PORT)],
                 { cwd: "..", stdio: "ignore" });
  for (let i = 0; i < 100; i++) {
    if (await serviceUp()) {
      return;
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("service did not come up");
}, 30_000);

afterAll(() => {
  server?.kill();
});

it("replayed session matches the report, surviving a reconnect", async () => {
  const api = new Api(BASE);
  const session = await api.createSession({
    mode: "mimo",
    seed: 1,
    time_scale: 40, // ~3 s wall-clock replay: slow enough to drop mid-way
  });
  const state = new ConsoleState();
  state.reset(session.id);
  await api.sendMessage(session.id, "abcdef");

  const seqs: number[] = [];
  const feed = (ev: LinkEvent) => {
    seqs.push(ev.seq);
    state.apply(ev);
  };

  // phase 1: stream until two characters are on screen, then drop
  await new Promise<void>((resolve, reject) => {
    const s1 = new EventStream(BASE, session.id, {
      onEvent: (ev) => {
        feed(ev);
        if (state.decoded[0].length + state.decoded[1].length >= 2) {
          s1.close();
          resolve();
        }
      },
      onEnd: () => reject(new Error("finished before the forced drop")),
    });
    s1.start(0);
    setTimeout(() => reject(new Error("no characters arrived")), 20_000);
  });
  expect(state.finished).toBe(false);

  // phase 2: reconnect from the next unseen seq and run to the end
  const endState = await new Promise<string>((resolve, reject) => {
    const s2 = new EventStream(BASE, session.id, {
      onEvent: feed,
      onEnd: resolve,
    });
    s2.start(state.resumeFrom());
    setTimeout(() => reject(new Error("stream never ended")), 30_000);
  });
  expect(endState).toBe("done");

  // nothing lost or duplicated across the reconnect
  expect(seqs[0]).toBe(0);
  for (let i = 1; i < seqs.length; i++) {
    expect(seqs[i]).toBe(seqs[i - 1] + 1);
  }

  // the receiver screens show the interleaved halves
  expect(state.decoded[0]).toBe("ace");
  expect(state.decoded[1]).toBe("bdf");
  expect(state.merged()).toBe("abcdef");

  // the frame_done summary equals the report endpoint, field for field
  const report = (await api.getReport(session.id)) as LinkReport;
  expect(state.report).toEqual(report);
  expect(report.air_time_s).toBe(63.0);
  expect(report.data_rate_bps).toBe(0.48);
  expect(report.message_decoded).toBe("abcdef");

  console.log(
    `[acceptance] console fidelity: PASS (panels "${state.decoded[0]}"/` +
      `"${state.decoded[1]}", ${report.air_time_s} s / ` +
      `${report.data_rate_bps} bps, ${seqs.length} events, 1 reconnect)`,
  );
}, 60_000);
