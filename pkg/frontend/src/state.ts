// Console state, fed one event at a time. Keeping this DOM-free makes
// the display invariants unit-testable: decoded text only ever grows,
// trace buffers stay bounded, characters land in arrival order.

import type {
  CharData,
  ConnectionStatus,
  LinkEvent,
  LinkReport,
  SampleData,
  SprayData,
  SymbolData,
} from "./types.js";

export const TRACE_CAPACITY = 600;
export const RX_COUNT = 2;

export interface TracePoint {
  t: number;
  v: number;
}

export interface SymbolMark {
  t: number;
  slot: number;
  bit: number;
  statistic: number;
  threshold: number;
}

export interface SprayMark {
  t: number;
  tx: number;
}

export class ConsoleState {
  sessionId: string | null = null;
  connection: ConnectionStatus = "idle";
  composed = "";
  decoded: string[] = Array.from({ length: RX_COUNT }, () => "");
  traces: TracePoint[][] = Array.from({ length: RX_COUNT }, () => []);
  symbols: SymbolMark[][] = Array.from({ length: RX_COUNT }, () => []);
  sprays: SprayMark[] = [];
  lastSeq = -1;
  report: LinkReport | null = null;
  // finished runs by mode, for the SISO vs MIMO summary row
  history: Map<string, LinkReport> = new Map();
  finished = false;

  reset(sessionId: string): void {
    this.sessionId = sessionId;
    this.composed = "";
    this.decoded = Array.from({ length: RX_COUNT }, () => "");
    this.traces = Array.from({ length: RX_COUNT }, () => []);
    this.symbols = Array.from({ length: RX_COUNT }, () => []);
    this.sprays = [];
    this.lastSeq = -1;
    this.report = null;
    this.finished = false;
  }

  apply(ev: LinkEvent): void {
    if (ev.seq <= this.lastSeq) {
      return; // replayed duplicate after a resume
    }
    this.lastSeq = ev.seq;
    switch (ev.kind) {
      case "spray": {
        const d = ev.data as unknown as SprayData;
        this.sprays.push({ t: ev.t_sim, tx: d.tx });
        break;
      }
      case "sample": {
        const d = ev.data as unknown as SampleData;
        const buf = this.traces[d.rx];
        buf.push({ t: ev.t_sim, v: d.v });
        if (buf.length > TRACE_CAPACITY) {
          buf.shift();
        }
        break;
      }
      case "symbol": {
        const d = ev.data as unknown as SymbolData;
        const marks = this.symbols[d.rx];
        marks.push({
          t: ev.t_sim,
          slot: d.slot,
          bit: d.bit,
          statistic: d.statistic,
          threshold: d.threshold,
        });
        if (marks.length > TRACE_CAPACITY) {
          marks.shift();
        }
        break;
      }
      case "char": {
        const d = ev.data as unknown as CharData;
        // append-only: a char event never rewrites what is on screen
        if (d.index === this.decoded[d.rx].length) {
          this.decoded[d.rx] += d.char;
        }
        break;
      }
      case "frame_done": {
        const report = (ev.data as { report?: LinkReport }).report ?? null;
        this.report = report;
        this.finished = true;
        if (report) {
          this.history.set(report.mode, report);
        }
        break;
      }
    }
  }

  /** Decoded streams merged back into message order (round-robin). */
  merged(): string {
    const parts = this.decoded.filter((p) => p.length > 0);
    if (parts.length === 0) {
      return "";
    }
    const n = this.decoded.length;
    let last = -1;
    this.decoded.forEach((p, i) => {
      if (p) {
        last = Math.max(last, (p.length - 1) * n + i);
      }
    });
    let out = "";
    for (let k = 0; k <= last; k++) {
      const part = this.decoded[k % n];
      const idx = Math.floor(k / n);
      out += idx < part.length ? part[idx] : "?";
    }
    return out;
  }

  /** Resume point for a dropped stream: next sequence we have not seen. */
  resumeFrom(): number {
    return this.lastSeq + 1;
  }
}
