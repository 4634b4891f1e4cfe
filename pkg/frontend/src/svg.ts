/**
 * Hand-rolled SVG charts.
 *
 * Two shapes cover the console: a multi-series line chart for the
 * calibration explorer and the accuracy view, and a compact sparkline
 * for per-client memory trends. All geometry lives here; callers pass
 * data values straight from service payloads.
 */

import { decimate } from "./decimate.js";
import { fmtNum } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {}
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export interface ChartPoint {
  x: number;
  y: number;
}

export interface ChartSeries {
  label: string;
  color: string;
  points: ChartPoint[];
}

export interface LineChartOptions {
  width?: number;
  height?: number;
  /** Data-space x positions to label. These are values the caller sent
   *  to or received from the service, never invented by the chart. */
  xTicks?: number[];
  /** Data-space y values to label, expected to be service numbers. */
  yTicks?: number[];
  onHover?: (seriesLabel: string, point: ChartPoint) => void;
  ariaLabel?: string;
}

interface Scale {
  (value: number): number;
}

function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  if (d0 === d1) {
    // degenerate domain: park everything mid-range
    const mid = (r0 + r1) / 2;
    return () => mid;
  }
  const slope = (r1 - r0) / (d1 - d0);
  return (value: number) => r0 + (value - d0) * slope;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export function lineChart(
  series: ChartSeries[],
  opts: LineChartOptions = {}
): SVGSVGElement {
  const width = opts.width ?? 560;
  const height = opts.height ?? 300;
  const margin = { top: 14, right: 16, bottom: 30, left: 56 };

  const drawn = series.map((s) => ({ ...s, points: decimate(s.points) }));
  const xs = drawn.flatMap((s) => s.points.map((p) => p.x));
  const ys = drawn.flatMap((s) => s.points.map((p) => p.y));

  const svg = svgEl("svg", {
    width: String(width),
    height: String(height),
    viewBox: `0 0 ${width} ${height}`,
    role: "img",
    class: "line-chart",
  });
  if (opts.ariaLabel) svg.setAttribute("aria-label", opts.ariaLabel);
  if (xs.length === 0) {
    const empty = svgEl("text", {
      x: String(width / 2),
      y: String(height / 2),
      "text-anchor": "middle",
      class: "chart-empty",
    });
    empty.textContent = "no data yet";
    svg.append(empty);
    return svg;
  }

  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const pad = y0 === y1 ? Math.max(1, Math.abs(y0)) * 0.05 : (y1 - y0) * 0.06;
  const sx = linearScale(x0, x1, margin.left, width - margin.right);
  const sy = linearScale(y0 - pad, y1 + pad, height - margin.bottom, margin.top);

  // frame
  svg.append(
    svgEl("line", {
      x1: String(margin.left),
      y1: String(height - margin.bottom),
      x2: String(width - margin.right),
      y2: String(height - margin.bottom),
      class: "axis",
    }),
    svgEl("line", {
      x1: String(margin.left),
      y1: String(margin.top),
      x2: String(margin.left),
      y2: String(height - margin.bottom),
      class: "axis",
    })
  );

  for (const tick of opts.xTicks ?? []) {
    const px = sx(tick);
    svg.append(
      svgEl("line", {
        x1: String(px),
        y1: String(height - margin.bottom),
        x2: String(px),
        y2: String(height - margin.bottom + 5),
        class: "tick",
      })
    );
    const label = svgEl("text", {
      x: String(px),
      y: String(height - margin.bottom + 18),
      "text-anchor": "middle",
      class: "tick-label",
      "data-source": "service",
      "data-label": "x-tick",
    });
    label.textContent = fmtNum(tick);
    svg.append(label);
  }

  for (const tick of opts.yTicks ?? []) {
    const py = sy(tick);
    svg.append(
      svgEl("line", {
        x1: String(margin.left - 5),
        y1: String(py),
        x2: String(margin.left),
        y2: String(py),
        class: "tick",
      })
    );
    const label = svgEl("text", {
      x: String(margin.left - 8),
      y: String(py + 4),
      "text-anchor": "end",
      class: "tick-label",
      "data-source": "service",
      "data-label": "y-tick",
    });
    label.textContent = fmtNum(tick);
    svg.append(label);
  }

  for (const s of drawn) {
    const ordered = [...s.points].sort((a, b) => a.x - b.x);
    const d = ordered
      .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.x).toFixed(2)} ${sy(p.y).toFixed(2)}`)
      .join(" ");
    svg.append(
      svgEl("path", {
        d,
        fill: "none",
        stroke: s.color,
        "stroke-width": "2",
        class: "series-line",
        "data-series": s.label,
      })
    );
    for (const p of ordered) {
      const marker = svgEl("circle", {
        cx: sx(p.x).toFixed(2),
        cy: sy(p.y).toFixed(2),
        r: "4",
        fill: s.color,
        class: "marker",
        "data-series": s.label,
        "data-x": fmtNum(p.x),
        "data-y": fmtNum(p.y),
      });
      if (opts.onHover) {
        marker.addEventListener("mouseenter", () => opts.onHover?.(s.label, p));
      }
      svg.append(marker);
    }
  }

  return svg;
}

export interface SparklineOptions {
  width?: number;
  height?: number;
  title?: string;
}

/** Compact single-series trend line; flat input draws a level line. */
export function sparkline(
  values: number[],
  opts: SparklineOptions = {}
): SVGSVGElement {
  const width = opts.width ?? 140;
  const height = opts.height ?? 24;
  const svg = svgEl("svg", {
    width: String(width),
    height: String(height),
    viewBox: `0 0 ${width} ${height}`,
    class: "sparkline",
  });
  if (opts.title) {
    const title = svgEl("title");
    title.textContent = opts.title;
    svg.append(title);
  }
  const drawn = decimate(values);
  if (drawn.length === 0) return svg;

  const [lo, hi] = extent(drawn);
  const flat = lo === hi;
  svg.setAttribute("data-flat", flat ? "true" : "false");
  const sx = linearScale(0, Math.max(1, drawn.length - 1), 2, width - 2);
  const sy = flat
    ? (() => height / 2) as Scale
    : linearScale(lo, hi, height - 3, 3);
  const points = drawn
    .map((v, i) => `${sx(i).toFixed(2)},${sy(v).toFixed(2)}`)
    .join(" ");
  svg.append(
    svgEl("polyline", {
      points,
      fill: "none",
      stroke: "currentColor",
      "stroke-width": "1.5",
      class: "spark-line",
    })
  );
  return svg;
}
