// Canvas line charts for per-second series, with the injection window
// shaded and an optional fault-free baseline overlay.

import type { CaseResultRow, SeriesRow } from "./types";

export interface ShadeBounds {
  fromS: number;
  toS: number;
}

// The injection window in whole seconds, straight from the report's phase
// boundaries (ms, case-relative).
export function shadeBounds(result: CaseResultRow): ShadeBounds | null {
  const inject = result.phases?.inject;
  if (!inject) return null;
  return { fromS: inject[0] / 1000, toS: inject[1] / 1000 };
}

export function injectSeconds(series: SeriesRow[]): number[] {
  return series.filter((row) => row.phase === "inject").map((row) => row.t_s);
}

export function drawSeries(
  canvas: HTMLCanvasElement,
  series: SeriesRow[],
  key: "throughput" | "mean_latency_ms" | "mean_response_ms" | "error_rate",
  title: string,
  shade: ShadeBounds | null,
  baseline?: SeriesRow[],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  const padL = 34;
  const padB = 16;
  const plotW = w - padL - 6;
  const plotH = h - padB - 18;
  const n = Math.max(series.length, baseline?.length ?? 0, 1);
  const values = series.map((r) => r[key]);
  const baseValues = baseline ? baseline.map((r) => r[key]) : [];
  const maxY = Math.max(0.001, ...values, ...baseValues) * 1.1;

  const x = (s: number) => padL + (s / Math.max(1, n - 1)) * plotW;
  const y = (v: number) => 14 + plotH - (v / maxY) * plotH;

  if (shade) {
    ctx.fillStyle = "rgba(214, 39, 40, 0.12)";
    ctx.fillRect(x(shade.fromS), 14, Math.max(2, x(shade.toS) - x(shade.fromS)), plotH);
  }

  ctx.strokeStyle = "#cbd5e1";
  ctx.strokeRect(padL, 14, plotW, plotH);

  const plot = (rows: number[], color: string, dashed: boolean) => {
    if (!rows.length) return;
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.setLineDash(dashed ? [5, 3] : []);
    ctx.beginPath();
    rows.forEach((v, i) => {
      if (i === 0) ctx.moveTo(x(i), y(v));
      else ctx.lineTo(x(i), y(v));
    });
    ctx.stroke();
    ctx.setLineDash([]);
  };
  plot(baseValues, "#94a3b8", true);
  plot(values, "#2563eb", false);

  ctx.fillStyle = "#111827";
  ctx.font = "11px sans-serif";
  ctx.fillText(title, padL, 10);
  ctx.fillText(maxY.toFixed(key === "error_rate" ? 2 : 1), 2, 20);
  ctx.fillText("0", 2, 14 + plotH);
}
