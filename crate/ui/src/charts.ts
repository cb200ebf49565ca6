// Canvas plots: endpoint time series with bands, and phase-space clouds.

import type { PhaseResult, VariableSummary } from "./api.js";
import { axisLabel, bandIsDegenerate, downsampleIndices } from "./logic.js";

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

interface Frame {
  ctx: CanvasRenderingContext2D;
  x: (v: number) => number;
  y: (v: number) => number;
}

function frame(canvas: HTMLCanvasElement, xr: [number, number], yr: [number, number]): Frame {
  const ctx = canvas.getContext("2d")!;
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  const sx = (w - pad - 8) / (xr[1] - xr[0] || 1);
  const sy = (h - pad - 8) / (yr[1] - yr[0] || 1);
  return { ctx, x: (v) => pad + (v - xr[0]) * sx, y: (v) => h - pad - (v - yr[0]) * sy };
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

export interface Series {
  label: string;
  color: string;
  summary: VariableSummary;
}

/** Mean line per run with its band; hovering reports the nearest values. */
export function drawEndpoint(canvas: HTMLCanvasElement, time: number[], series: Series[], title: string): void {
  const idx = downsampleIndices(time.length);
  const all = series.flatMap((s) => idx.flatMap((i) => [s.summary.lo[i], s.summary.hi[i], s.summary.mean[i]]));
  const f = frame(canvas, extent(time), extent(all));
  const { ctx } = f;
  for (const s of series) {
    const v = s.summary;
    if (!bandIsDegenerate(v.lo, v.hi)) {
      ctx.beginPath();
      idx.forEach((i, k) => (k ? ctx.lineTo(f.x(time[i]), f.y(v.hi[i])) : ctx.moveTo(f.x(time[i]), f.y(v.hi[i]))));
      [...idx].reverse().forEach((i) => ctx.lineTo(f.x(time[i]), f.y(v.lo[i])));
      ctx.closePath();
      ctx.globalAlpha = 0.2;
      ctx.fillStyle = s.color;
      ctx.fill();
      ctx.globalAlpha = 1;
    }
    ctx.beginPath();
    idx.forEach((i, k) => (k ? ctx.lineTo(f.x(time[i]), f.y(v.mean[i])) : ctx.moveTo(f.x(time[i]), f.y(v.mean[i]))));
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
  ctx.fillStyle = "#222";
  ctx.fillText(title, 40, 20);
  canvas.onmousemove = (ev) => {
    const t = time[0] + ((ev.offsetX - 36) / (canvas.width - 44)) * (time[time.length - 1] - time[0]);
    let i = 0;
    while (i + 1 < time.length && time[i + 1] <= t) i++;
    canvas.title = series
      .map((s) => `${s.label} t=${time[i].toFixed(2)} s mean ${s.summary.mean[i].toPrecision(4)} [${s.summary.lo[i].toPrecision(4)}, ${s.summary.hi[i].toPrecision(4)}]`)
      .join("\n");
  };
}

/** Scatter of projected points per visible run, colored by run. */
export function drawPhase(canvas: HTMLCanvasElement, phase: PhaseResult, colors: Map<string, string>, hidden: Set<string>): void {
  const shown = phase.runs.filter((r) => !hidden.has(r.label));
  const f = frame(
    canvas,
    extent(shown.flatMap((r) => r.points.map((p) => p[0]))),
    extent(shown.flatMap((r) => r.points.map((p) => p[1]))),
  );
  const { ctx } = f;
  for (const r of shown) {
    ctx.fillStyle = colors.get(r.label) ?? "#333";
    ctx.globalAlpha = 0.35;
    for (const i of downsampleIndices(r.points.length)) {
      const [px, py] = r.points[i];
      ctx.fillRect(f.x(px) - 1, f.y(py) - 1, 2, 2);
    }
  }
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#222";
  ctx.fillText(axisLabel(0, phase.explained_ratio), canvas.width / 2 - 30, canvas.height - 10);
  ctx.save();
  ctx.translate(12, canvas.height / 2 + 30);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(axisLabel(1, phase.explained_ratio), 0, 0);
  ctx.restore();
}
