// Operator console: transmitter pane on the left, two receiver screens
// on the right. All link results come from the service; this file only
// routes events into ConsoleState and paints.

import { Api, ApiError } from "./api.js";
import { TraceChart } from "./chart.js";
import { ConsoleState } from "./state.js";
import { EventStream } from "./stream.js";
import type { LinkReport, SessionOverrides } from "./types.js";

const api = new Api("");
const state = new ConsoleState();
let stream: EventStream | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const modeSelect = el<HTMLSelectElement>("mode");
const seedInput = el<HTMLInputElement>("seed");
const messageInput = el<HTMLInputElement>("message");
const sendButton = el<HTMLButtonElement>("send");
const connBadge = el<HTMLSpanElement>("connection");
const mergedLine = el<HTMLDivElement>("merged");
const summaryBox = el<HTMLDivElement>("summary");
const errorBox = el<HTMLDivElement>("error");

const backendSelect = el<HTMLSelectElement>("backend");
const particlesInput = el<HTMLInputElement>("particles");
const noiseInput = el<HTMLInputElement>("noise");
const iliInput = el<HTMLInputElement>("ili");
const paceInput = el<HTMLInputElement>("pace");

const panels = [el<HTMLDivElement>("rx0-text"), el<HTMLDivElement>("rx1-text")];
const sprayDots = [el<HTMLSpanElement>("tx0-dot"), el<HTMLSpanElement>("tx1-dot")];
const slotLines = [el<HTMLDivElement>("rx0-slot"), el<HTMLDivElement>("rx1-slot")];
const charts = [
  new TraceChart(el<HTMLCanvasElement>("rx0-chart")),
  new TraceChart(el<HTMLCanvasElement>("rx1-chart")),
];

function setBadge(text: string, cls: string): void {
  connBadge.textContent = text;
  connBadge.className = `badge ${cls}`;
}

function fmtRate(r: LinkReport): string {
  return `${r.air_time_s.toFixed(1)} s, ${r.data_rate_bps.toFixed(2)} bit/s`;
}

function renderSummary(): void {
  const rows: string[] = [];
  for (const [mode, r] of state.history) {
    rows.push(
      `<tr><td>${mode}</td><td>${fmtRate(r)}</td>` +
        `<td>${r.message_decoded}</td><td>${r.ber.toFixed(3)}</td></tr>`,
    );
  }
  let compare = "";
  const siso = state.history.get("siso");
  const mimo = state.history.get("mimo");
  if (siso && mimo) {
    const gain = (mimo.data_rate_bps / siso.data_rate_bps).toFixed(2);
    compare = `<p>dual-stream rate gain: x${gain}</p>`;
  }
  summaryBox.innerHTML = rows.length
    ? `<table><tr><th>mode</th><th>link</th><th>decoded</th><th>BER</th></tr>` +
      rows.join("") +
      `</table>${compare}`
    : "";
}

let flashTimers: (ReturnType<typeof setTimeout> | null)[] = [null, null];

function flashSpray(tx: number): void {
  const dot = sprayDots[tx];
  dot.classList.add("firing");
  const old = flashTimers[tx];
  if (old !== null) {
    clearTimeout(old);
  }
  flashTimers[tx] = setTimeout(() => dot.classList.remove("firing"), 140);
}

function paint(): void {
  for (let rx = 0; rx < panels.length; rx++) {
    panels[rx].textContent = state.decoded[rx];
    charts[rx].draw(state.traces[rx], state.symbols[rx]);
    const marks = state.symbols[rx];
    if (marks.length > 0) {
      const m = marks[marks.length - 1];
      slotLines[rx].textContent =
        `slot ${m.slot}: stat ${m.statistic.toFixed(3)} ` +
        `thr ${m.threshold.toFixed(3)} -> ${m.bit}`;
    }
  }
  mergedLine.textContent = state.merged();
}

let painting = false;

function schedulePaint(): void {
  if (painting) {
    return;
  }
  painting = true;
  requestAnimationFrame(() => {
    painting = false;
    paint();
  });
}

function overrides(): SessionOverrides {
  const o: SessionOverrides = {
    mode: modeSelect.value,
    seed: Number(seedInput.value) || 0,
    time_scale: Number(paceInput.value) || 60,
  };
  if (backendSelect.value !== "analytical") {
    o.backend = backendSelect.value;
    o.particles = Number(particlesInput.value) || 200000;
  }
  const noise = Number(noiseInput.value);
  if (noise > 0) {
    o.noise = noise;
  }
  if (!iliInput.checked) {
    o.ili_cancellation = false;
  }
  return o;
}

async function transmit(): Promise<void> {
  const text = messageInput.value.trim();
  if (!text) {
    return;
  }
  sendButton.disabled = true;
  errorBox.textContent = "";
  try {
    const session = await api.createSession(overrides());
    state.reset(session.id);
    state.composed = text;
    paint();
    renderSummary();
    await api.sendMessage(session.id, text);
    stream?.close();
    stream = new EventStream("", session.id, {
      onEvent: (ev) => {
        state.apply(ev);
        if (ev.kind === "spray") {
          flashSpray((ev.data as { tx: number }).tx);
        }
        if (ev.kind === "frame_done") {
          renderSummary();
        }
        schedulePaint();
      },
      onStatus: (s) => {
        state.connection = s;
        if (s === "live") {
          setBadge("live", "ok");
        } else if (s === "reconnecting") {
          setBadge("reconnecting...", "warn");
        } else if (s === "ended") {
          setBadge("done", "idle");
        } else {
          setBadge(s, "idle");
        }
      },
      onEnd: () => {
        sendButton.disabled = false;
        paint();
      },
    });
    stream.start(0);
  } catch (err) {
    sendButton.disabled = false;
    errorBox.textContent =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  }
}

sendButton.addEventListener("click", () => void transmit());
messageInput.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") {
    void transmit();
  }
});
el<HTMLButtonElement>("advanced-toggle").addEventListener("click", () => {
  el<HTMLDivElement>("advanced").classList.toggle("open");
});

setBadge("idle", "idle");
paint();
