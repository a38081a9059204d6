/** Deterministic SVG assembly: fixed float formatting, no timestamps. */

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toPrecision(6);
  return s.includes(".") || s.includes("e")
    ? s.replace(/\.?0+($|e)/, "$1")
    : s;
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opts = ""): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}" ${opts}/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, opts = ""): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${fmt(width)}" ${opts}/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string, opts = ""): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" fill="${fill}" ${opts}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  text(x: number, y: number, s: string, size = 11, opts = ""): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ${opts}>${escapeXml(s)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Compact blue->yellow colormap for heatmaps (deterministic). */
export function colormap(t: number): string {
  const c = Math.max(0, Math.min(1, t));
  const r = Math.round(255 * Math.min(1, 0.267 + 1.5 * c * c + 0.2 * c));
  const g = Math.round(255 * (0.005 + 0.93 * c));
  const b = Math.round(255 * Math.max(0, 0.33 + 0.45 * c - 0.75 * c * c));
  return `rgb(${r},${g},${b})`;
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = [d0, d1];
  return f;
}

export function axes(
  svg: Svg,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  xs: Scale,
  ys: Scale,
  xLabel: string,
  yLabel: string,
): void {
  svg.line(x0, y1, x1, y1, "#333");
  svg.line(x0, y0, x0, y1, "#333");
  for (const t of ticks(xs.domain[0], xs.domain[1], 5)) {
    const px = xs(t);
    svg.line(px, y1, px, y1 + 4, "#333");
    svg.text(px, y1 + 16, fmt(t), 10, 'text-anchor="middle"');
  }
  for (const t of ticks(ys.domain[0], ys.domain[1], 5)) {
    const py = ys(t);
    svg.line(x0 - 4, py, x0, py, "#333");
    svg.text(x0 - 6, py + 3, fmt(t), 10, 'text-anchor="end"');
  }
  svg.text((x0 + x1) / 2, y1 + 32, xLabel, 11, 'text-anchor="middle"');
  svg.text(x0 - 38, y0 - 8, yLabel, 11);
}

export function ticks(lo: number, hi: number, n: number): number[] {
  if (!(hi > lo)) return [lo];
  const step = (hi - lo) / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step)));
  const nice = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= step) ?? step;
  const start = Math.ceil(lo / nice) * nice;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += nice) out.push(Number(v.toPrecision(12)));
  return out;
}
