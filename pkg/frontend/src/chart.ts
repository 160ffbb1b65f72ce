/** Dependency-free SVG time series chart. */

import type { MvPreview, Preview, UvPreview } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const WIDTH = 860;
const HEIGHT = 280;
const MARGIN = { top: 12, right: 16, bottom: 28, left: 56 };

// Display cap for line vertices. Flagged markers are exempt: every point the
// service flagged gets a marker, regardless of how the line is thinned.
export const DISPLAY_POINT_CAP = 2000;

const PALETTE = ["#2563eb", "#059669", "#d97706", "#7c3aed", "#0891b2"];

/** Evenly spaced index subset of size <= cap, endpoints kept. */
export function decimateIndexes(n: number, cap: number = DISPLAY_POINT_CAP): number[] {
  if (n <= 0) return [];
  if (n <= cap) return Array.from({ length: n }, (_, i) => i);
  const out: number[] = [];
  const stride = (n - 1) / (cap - 1);
  for (let i = 0; i < cap; i++) {
    out.push(Math.round(i * stride));
  }
  out[out.length - 1] = n - 1;
  return out;
}

function el<K extends string>(tag: K, attrs: Record<string, string | number> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

interface Scale {
  x(ts: number): number;
  y(v: number): number;
}

function makeScale(timestamps: number[], lo: number, hi: number): Scale {
  const t0 = timestamps[0];
  const t1 = timestamps[timestamps.length - 1];
  const tSpan = Math.max(t1 - t0, 1);
  const vSpan = Math.max(hi - lo, 1e-9);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  return {
    x: (ts) => MARGIN.left + ((ts - t0) / tSpan) * plotW,
    y: (v) => MARGIN.top + (1 - (v - lo) / vSpan) * plotH,
  };
}

function polyline(
  timestamps: number[],
  values: number[],
  idx: number[],
  scale: Scale,
  stroke: string,
  dashed: boolean,
): SVGElement {
  const pts = idx
    .map((i) => `${scale.x(timestamps[i]).toFixed(1)},${scale.y(values[i]).toFixed(1)}`)
    .join(" ");
  const line = el("polyline", {
    points: pts,
    fill: "none",
    stroke,
    "stroke-width": 1.5,
  });
  if (dashed) line.setAttribute("stroke-dasharray", "5,4");
  return line;
}

function axes(svg: SVGElement, timestamps: number[], lo: number, hi: number, scale: Scale): void {
  const t0 = timestamps[0];
  const t1 = timestamps[timestamps.length - 1];
  for (const frac of [0, 0.5, 1]) {
    const v = lo + frac * (hi - lo);
    const label = el("text", {
      x: MARGIN.left - 6,
      y: scale.y(v) + 4,
      "text-anchor": "end",
      "font-size": 11,
      fill: "#6b7280",
    });
    label.textContent = Math.abs(v) >= 1000 ? v.toFixed(0) : v.toFixed(2);
    svg.appendChild(label);
    svg.appendChild(
      el("line", {
        x1: MARGIN.left,
        x2: WIDTH - MARGIN.right,
        y1: scale.y(v),
        y2: scale.y(v),
        stroke: "#e5e7eb",
        "stroke-width": 1,
      }),
    );
  }
  for (const [frac, anchor] of [
    [0, "start"],
    [1, "end"],
  ] as const) {
    const ts = t0 + frac * (t1 - t0);
    const label = el("text", {
      x: scale.x(ts),
      y: HEIGHT - 8,
      "text-anchor": anchor,
      "font-size": 11,
      fill: "#6b7280",
    });
    label.textContent = new Date(ts).toISOString().replace("T", " ").slice(0, 16);
    svg.appendChild(label);
  }
}

function flaggedMarkers(
  timestamps: number[],
  values: number[],
  flagged: boolean[],
  scale: Scale,
): SVGElement[] {
  const out: SVGElement[] = [];
  for (let i = 0; i < flagged.length; i++) {
    if (!flagged[i]) continue;
    const c = el("circle", {
      cx: scale.x(timestamps[i]).toFixed(1),
      cy: scale.y(values[i]).toFixed(1),
      r: 3.5,
      fill: "#dc2626",
      "fill-opacity": 0.85,
    });
    c.setAttribute("class", "flagged-point");
    c.setAttribute("data-ts", String(timestamps[i]));
    out.push(c);
  }
  return out;
}

function emptyChart(message: string): SVGElement {
  const svg = el("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    width: "100%",
  });
  svg.setAttribute("class", "preview-chart");
  const text = el("text", {
    x: WIDTH / 2,
    y: HEIGHT / 2,
    "text-anchor": "middle",
    "font-size": 14,
    fill: "#9ca3af",
  });
  text.textContent = message;
  svg.appendChild(text);
  return svg;
}

function renderUv(preview: UvPreview): SVGElement {
  const { timestamps, original, predicted, flagged } = preview;
  if (timestamps.length === 0) return emptyChart("no points in preview");
  const all = original.concat(predicted);
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const scale = makeScale(timestamps, lo, hi);
  const idx = decimateIndexes(timestamps.length);

  const svg = el("svg", { viewBox: `0 0 ${WIDTH} ${HEIGHT}`, width: "100%" });
  svg.setAttribute("class", "preview-chart");
  axes(svg, timestamps, lo, hi, scale);
  svg.appendChild(polyline(timestamps, original, idx, scale, PALETTE[0], false));
  svg.appendChild(polyline(timestamps, predicted, idx, scale, "#9ca3af", true));
  for (const marker of flaggedMarkers(timestamps, original, flagged, scale)) {
    svg.appendChild(marker);
  }
  return svg;
}

function renderMv(preview: MvPreview): SVGElement {
  const { timestamps, signals, scores, flagged } = preview;
  if (timestamps.length === 0) return emptyChart("no points in preview");
  const series = Object.entries(signals);
  const values = series.flatMap(([, v]) => v);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const scale = makeScale(timestamps, lo, hi);
  const idx = decimateIndexes(timestamps.length);

  const svg = el("svg", { viewBox: `0 0 ${WIDTH} ${HEIGHT}`, width: "100%" });
  svg.setAttribute("class", "preview-chart");
  axes(svg, timestamps, lo, hi, scale);
  series.forEach(([, vals], i) => {
    svg.appendChild(polyline(timestamps, vals, idx, scale, PALETTE[i % PALETTE.length], false));
  });
  // anchor markers to the first series; the flag is a joint verdict over all of them
  const anchor = series.length > 0 ? series[0][1] : scores;
  for (const marker of flaggedMarkers(timestamps, anchor, flagged, scale)) {
    svg.appendChild(marker);
  }
  return svg;
}

/**
 * Render a preview response to an SVG element.
 *
 * The geometry comes straight from the response: the line may be thinned for
 * display, but flagged markers are drawn for exactly the indexes the service
 * marked, never recomputed here.
 */
export function renderPreviewChart(preview: Preview): SVGElement {
  return preview.kind === "univariate" ? renderUv(preview) : renderMv(preview);
}

/** Small line chart for raw range-query results, used before any model exists. */
export function renderRangeChart(
  timestamps: number[],
  valuesBySeries: { label: string; values: number[] }[],
): SVGElement {
  if (timestamps.length === 0 || valuesBySeries.length === 0) {
    return emptyChart("no samples in range");
  }
  const flat = valuesBySeries.flatMap((s) => s.values);
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  const scale = makeScale(timestamps, lo, hi);
  const idx = decimateIndexes(timestamps.length);
  const svg = el("svg", { viewBox: `0 0 ${WIDTH} ${HEIGHT}`, width: "100%" });
  svg.setAttribute("class", "range-chart");
  axes(svg, timestamps, lo, hi, scale);
  valuesBySeries.forEach((s, i) => {
    svg.appendChild(polyline(timestamps, s.values, idx, scale, PALETTE[i % PALETTE.length], false));
  });
  return svg;
}
