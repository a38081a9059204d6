/**
 * Figure renderers over the milestoning CSV artifacts.
 *
 * Five kinds: flux-bars, reservoir-scatter, milestone-hist, heatmap,
 * convergence.  Strictly read-only over the documented schemas; output is
 * deterministic SVG (identical inputs and styling give identical bytes).
 */

import { numericColumns, readCsv, SchemaError } from "./csv.js";
import { axes, colormap, fmt, linearScale, Svg, ticks } from "./svg.js";

export interface FigureRequest {
  kind: "flux-bars" | "reservoir-scatter" | "milestone-hist" | "heatmap" | "convergence";
  inputs: string[];
  output: string;
  title?: string;
  overlay?: string; // partition.csv for heatmap milestone overlay
  width?: number;
  height?: number;
}

export function render(req: FigureRequest): { svg: string; note: string } {
  switch (req.kind) {
    case "flux-bars":
      return fluxBars(req);
    case "reservoir-scatter":
      return reservoirScatter(req);
    case "milestone-hist":
      return milestoneHist(req);
    case "heatmap":
      return heatmap(req);
    case "convergence":
      return convergence(req);
    default:
      throw new SchemaError(`unknown figure kind '${(req as FigureRequest).kind}'`);
  }
}

function need(req: FigureRequest, n: number): string[] {
  if (req.inputs.length !== n) {
    throw new SchemaError(`${req.kind}: expected ${n} input file(s), got ${req.inputs.length}`);
  }
  return req.inputs;
}

function fluxBars(req: FigureRequest): { svg: string; note: string } {
  const [path] = need(req, 1);
  const cols = numericColumns(path, readCsv(path), ["milestone_index", "weight"]);
  const W = req.width ?? 640;
  const H = req.height ?? 400;
  const svg = new Svg(W, H);
  const m = cols.milestone_index.length;
  const wMax = Math.max(...cols.weight);
  const xs = linearScale(-0.5, m - 0.5, 60, W - 20);
  const ys = linearScale(0, wMax, H - 50, 30);
  axes(svg, 60, 30, W - 20, H - 50, xs, ys, "milestone", "weight");
  const barW = ((W - 80) / m) * 0.8;
  for (let i = 0; i < m; i++) {
    const x = xs(cols.milestone_index[i]) - barW / 2;
    svg.rect(x, ys(cols.weight[i]), barW, H - 50 - ys(cols.weight[i]), "#4878cf");
  }
  svg.text(W / 2, 18, req.title ?? "stationary flux weights", 13, 'text-anchor="middle"');
  const total = cols.weight.reduce((a, b) => a + b, 0);
  return { svg: svg.render(), note: `weights sum = ${total.toPrecision(12)}` };
}

function reservoirScatter(req: FigureRequest): { svg: string; note: string } {
  // two flux.csv files side by side (reference run left, iterated run right)
  const [left, right] = need(req, 2);
  const W = req.width ?? 880;
  const H = req.height ?? 400;
  const svg = new Svg(W, H);
  const panels: Array<[string, number, string]> = [
    [left, 50, "long trajectories"],
    [right, W / 2 + 30, "iterated flux"],
  ];
  let note = "";
  for (const [path, x0, label] of panels) {
    const cols = numericColumns(path, readCsv(path), [
      "milestone_index",
      "weight",
      "reservoir_size",
    ]);
    const m = cols.milestone_index.length;
    const panelW = W / 2 - 70;
    const wMax = Math.max(...cols.weight, 1e-12);
    const xs = linearScale(-0.5, m - 0.5, x0, x0 + panelW);
    const ys = linearScale(0, wMax * 1.05, H - 50, 40);
    axes(svg, x0, 40, x0 + panelW, H - 50, xs, ys, "milestone", "weight");
    const sizeMax = Math.max(...cols.reservoir_size, 1);
    for (let i = 0; i < m; i++) {
      const r = 2 + 8 * Math.sqrt(cols.reservoir_size[i] / sizeMax);
      svg.circle(xs(cols.milestone_index[i]), ys(cols.weight[i]), r,
        "rgba(72,120,207,0.75)");
    }
    svg.text(x0 + panelW / 2, 28, label, 12, 'text-anchor="middle"');
    note += `${label}: ${m} milestones; `;
  }
  svg.text(W / 2, 14, req.title ?? "flux comparison (marker area ~ reservoir size)",
    13, 'text-anchor="middle"');
  return { svg: svg.render(), note: note.trim() };
}

function milestoneHist(req: FigureRequest): { svg: string; note: string } {
  // per-milestone empirical end-point distributions from fragments.csv
  const [path] = need(req, 1);
  const cols = numericColumns(path, readCsv(path), [
    "end_milestone",
    "end_x1",
    "end_x2",
  ]);
  const counts = new Map<number, number>();
  for (const ms of cols.end_milestone) counts.set(ms, (counts.get(ms) ?? 0) + 1);
  const top = [...counts.entries()].sort((a, b) => b[1] - a[1] || a[0] - b[0]).slice(0, 4);
  const W = req.width ?? 880;
  const H = req.height ?? 520;
  const svg = new Svg(W, H);
  svg.text(W / 2, 16, req.title ?? "empirical milestone distributions", 13,
    'text-anchor="middle"');
  const nbins = 30;
  top.forEach(([ms], p) => {
    const px = 60 + (p % 2) * (W / 2);
    const py = 40 + Math.floor(p / 2) * (H / 2 - 10);
    const panelW = W / 2 - 90;
    const panelH = H / 2 - 80;
    // project end points of this milestone onto their dominant axis
    const xs1: number[] = [];
    const xs2: number[] = [];
    cols.end_milestone.forEach((m, i) => {
      if (m === ms) {
        xs1.push(cols.end_x1[i]);
        xs2.push(cols.end_x2[i]);
      }
    });
    const span1 = Math.max(...xs1) - Math.min(...xs1);
    const span2 = Math.max(...xs2) - Math.min(...xs2);
    const v = span1 >= span2 ? xs1 : xs2;
    const axis = span1 >= span2 ? "x1" : "x2";
    const lo = Math.min(...v);
    const hi = Math.max(...v) + 1e-12;
    const hist = new Array<number>(nbins).fill(0);
    for (const val of v) {
      hist[Math.min(nbins - 1, Math.floor(((val - lo) / (hi - lo)) * nbins))] += 1;
    }
    const hMax = Math.max(...hist, 1);
    const sx = linearScale(lo, hi, px, px + panelW);
    const sy = linearScale(0, hMax, py + panelH, py);
    axes(svg, px, py, px + panelW, py + panelH, sx, sy, axis, "count");
    const bw = panelW / nbins;
    hist.forEach((c, b) => {
      svg.rect(px + b * bw, sy(c), bw, py + panelH - sy(c), "#c44e52");
    });
    svg.text(px + panelW / 2, py - 6, `milestone ${ms} (${v.length} points)`, 11,
      'text-anchor="middle"');
  });
  return { svg: svg.render(), note: `panels: ${top.map(([m]) => m).join(", ")}` };
}

function heatmap(req: FigureRequest): { svg: string; note: string } {
  const [path] = need(req, 1);
  const cols = numericColumns(path, readCsv(path), ["x1", "x2", "u"]);
  const ux = uniqueSorted(cols.x1);
  const uy = uniqueSorted(cols.x2);
  if (ux.length * uy.length !== cols.u.length) {
    throw new SchemaError(`${path}: rows do not form a full x1/x2 grid`);
  }
  const W = req.width ?? 640;
  const H = req.height ?? 560;
  const svg = new Svg(W, H);
  const finite = cols.u.filter(Number.isFinite);
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  // compress the display range: high-energy tails swamp the contrast
  hi = Math.min(hi, lo + 1.5 * (quantile(finite, 0.98) - lo) + 1e-12);
  const plotW = W - 80;
  const plotH = H - 90;
  const sx = linearScale(ux[0], ux[ux.length - 1], 60, 60 + plotW);
  const sy = linearScale(uy[0], uy[uy.length - 1], 40 + plotH, 40);
  const xIndex = new Map(ux.map((v, i) => [v, i]));
  const yIndex = new Map(uy.map((v, i) => [v, i]));
  const cw = plotW / (ux.length - 1 || 1);
  const ch = plotH / (uy.length - 1 || 1);
  for (let k = 0; k < cols.u.length; k++) {
    const i = xIndex.get(cols.x1[k])!;
    const j = yIndex.get(cols.x2[k])!;
    const t = (Math.min(cols.u[k], hi) - lo) / (hi - lo || 1);
    svg.rect(60 + i * cw - cw / 2, 40 + plotH - (j + 1) * ch + ch / 2, cw + 0.5, ch + 0.5,
      colormap(1 - t));
  }
  axes(svg, 60, 40, 60 + plotW, 40 + plotH, sx, sy, "x1", "x2");
  let note = `u range [${fmt(lo)}, ${fmt(hi)}]`;
  if (req.overlay) {
    const seg = numericColumns(req.overlay, readCsv(req.overlay), [
      "milestone_index", "seg_index", "x1a", "x2a", "x1b", "x2b",
    ]);
    for (let k = 0; k < seg.x1a.length; k++) {
      svg.line(sx(seg.x1a[k]), sy(seg.x2a[k]), sx(seg.x1b[k]), sy(seg.x2b[k]),
        "#222", 1.4, 'stroke-dasharray="4,3"');
    }
    note += `; ${seg.x1a.length} milestone segments overlaid`;
  }
  svg.text(W / 2, 20, req.title ?? "potential energy", 13, 'text-anchor="middle"');
  return { svg: svg.render(), note };
}

function convergence(req: FigureRequest): { svg: string; note: string } {
  const [path] = need(req, 1);
  const cols = numericColumns(path, readCsv(path), ["iteration", "T", "delta_T"]);
  const pts: Array<[number, number]> = [];
  cols.iteration.forEach((n, i) => {
    if (Number.isFinite(cols.T[i])) pts.push([n, cols.T[i]]);
  });
  if (pts.length === 0) {
    throw new SchemaError(`${path}: no finite T values to plot`);
  }
  const W = req.width ?? 640;
  const H = req.height ?? 400;
  const svg = new Svg(W, H);
  const tLo = Math.min(...pts.map((p) => p[1]));
  const tHi = Math.max(...pts.map((p) => p[1]));
  const xs = linearScale(pts[0][0], pts[pts.length - 1][0], 70, W - 20);
  const ys = linearScale(tLo * 0.95, tHi * 1.05, H - 50, 30);
  axes(svg, 70, 30, W - 20, H - 50, xs, ys, "iteration", "T");
  svg.polyline(pts.map(([n, t]) => [xs(n), ys(t)]), "#4878cf", 1.8);
  for (const [n, t] of pts) svg.circle(xs(n), ys(t), 2.6, "#4878cf");
  svg.text(W / 2, 18, req.title ?? "passage-time iterate", 13, 'text-anchor="middle"');
  return { svg: svg.render(), note: `${pts.length} iterations, final T = ${fmt(pts[pts.length - 1][1])}` };
}

function uniqueSorted(v: number[]): number[] {
  return [...new Set(v)].sort((a, b) => a - b);
}

function quantile(v: number[], q: number): number {
  const s = [...v].sort((a, b) => a - b);
  return s[Math.min(s.length - 1, Math.floor(q * s.length))];
}
