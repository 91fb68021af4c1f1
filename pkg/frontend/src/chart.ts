// Rolling voltage-trace chart on a bare 2d canvas. One chart per
// receiver; redraws whole frames, which is cheap at 600 points.

import type { SymbolMark, TracePoint } from "./state.js";

const PAD_LEFT = 44;
const PAD_BOTTOM = 18;
const PAD_TOP = 8;
const PAD_RIGHT = 8;

export class TraceChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) {
      throw new Error("2d canvas is not available");
    }
    this.ctx = ctx;
  }

  draw(points: TracePoint[], marks: SymbolMark[]): void {
    const { ctx, canvas } = this;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#10141b";
    ctx.fillRect(0, 0, w, h);
    if (points.length < 2) {
      return;
    }

    const t0 = points[0].t;
    const t1 = points[points.length - 1].t;
    let vMax = 0;
    for (const p of points) {
      vMax = Math.max(vMax, p.v);
    }
    vMax = Math.max(vMax * 1.1, 1e-6);
    const x = (t: number) =>
      PAD_LEFT + ((t - t0) / (t1 - t0)) * (w - PAD_LEFT - PAD_RIGHT);
    const y = (v: number) =>
      h - PAD_BOTTOM - (v / vMax) * (h - PAD_TOP - PAD_BOTTOM);

    // axes
    ctx.strokeStyle = "#2a3342";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(PAD_LEFT, PAD_TOP);
    ctx.lineTo(PAD_LEFT, h - PAD_BOTTOM);
    ctx.lineTo(w - PAD_RIGHT, h - PAD_BOTTOM);
    ctx.stroke();
    ctx.fillStyle = "#6b7a90";
    ctx.font = "10px monospace";
    ctx.fillText(vMax.toPrecision(2) + " V", 2, PAD_TOP + 8);
    ctx.fillText(t0.toFixed(0) + "s", PAD_LEFT, h - 5);
    ctx.fillText(t1.toFixed(0) + "s", w - PAD_RIGHT - 30, h - 5);

    // symbol decisions inside the visible window
    for (const m of marks) {
      if (m.t < t0 || m.t > t1) {
        continue;
      }
      ctx.strokeStyle = m.bit === 1 ? "#3fae6a" : "#4a5668";
      ctx.beginPath();
      ctx.moveTo(x(m.t), PAD_TOP);
      ctx.lineTo(x(m.t), h - PAD_BOTTOM);
      ctx.stroke();
    }

    // the trace itself
    ctx.strokeStyle = "#58a6ff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(x(points[0].t), y(points[0].v));
    for (let i = 1; i < points.length; i++) {
      ctx.lineTo(x(points[i].t), y(points[i].v));
    }
    ctx.stroke();
  }
}
