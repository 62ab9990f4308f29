/** Minimal deterministic SVG line/step charts (no DOM, plain strings). */

export interface Point {
  x: number;
  y: number;
  /** Half-height of a vertical error bar, if any. */
  err?: number;
}

export interface Series {
  name: string;
  points: Point[];
  /** "line" joins points directly; "step" holds y until the next x. */
  style: "line" | "step";
}

export interface ChartSpec {
  title: string;
  xlabel: string;
  ylabel: string;
  series: Series[];
}

const WIDTH = 680;
const HEIGHT = 420;
const MARGIN = { left: 64, right: 170, top: 42, bottom: 52 };
const PALETTE = ["#1f6fb4", "#d95f02", "#2a9d54", "#b03a8c", "#7a6200",
                 "#4b4b8f"];

function fmt(x: number): string {
  // Fixed short formatting keeps output byte-stable across runs.
  if (!Number.isFinite(x)) return "0";
  const r = Math.round(x * 1000) / 1000;
  return Object.is(r, -0) ? "0" : String(r);
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

/** Round tick spacing to 1/2/5 x 10^k covering the range with ~n ticks. */
export function niceTicks(lo: number, hi: number, n = 5): number[] {
  const span = hi - lo;
  const raw = span / Math.max(1, n);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let t = first; t <= hi + step * 1e-9; t += step) {
    ticks.push(Math.round(t / step) * step);
  }
  return ticks;
}

class Scale {
  constructor(private lo: number, private hi: number,
              private out0: number, private out1: number) {}

  map(v: number): number {
    const t = (v - this.lo) / (this.hi - this.lo);
    return this.out0 + t * (this.out1 - this.out0);
  }
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderChart(spec: ChartSpec): string {
  const xs = spec.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = spec.series.flatMap((s) =>
    s.points.flatMap((p) => p.err ? [p.y - p.err, p.y + p.err] : [p.y]));
  let [xlo, xhi] = extent(xs);
  let [ylo, yhi] = extent(ys);
  const ypad = (yhi - ylo) * 0.06;
  ylo = Math.min(0, ylo - ypad);
  yhi = yhi + ypad;
  const sx = new Scale(xlo, xhi, MARGIN.left, WIDTH - MARGIN.right);
  const sy = new Scale(ylo, yhi, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
             `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
             `font-family="sans-serif" font-size="12">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(`<text x="${WIDTH / 2}" y="22" text-anchor="middle" ` +
             `font-size="15">${esc(spec.title)}</text>`);

  const plotBottom = HEIGHT - MARGIN.bottom;
  const plotRight = WIDTH - MARGIN.right;
  for (const t of niceTicks(xlo, xhi)) {
    const px = sx.map(t);
    parts.push(`<line x1="${fmt(px)}" y1="${plotBottom}" x2="${fmt(px)}" ` +
               `y2="${plotBottom + 5}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(px)}" y="${plotBottom + 18}" ` +
               `text-anchor="middle">${fmt(t)}</text>`);
  }
  for (const t of niceTicks(ylo, yhi)) {
    const py = sy.map(t);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${fmt(py)}" ` +
               `x2="${MARGIN.left}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(`<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${plotRight}" ` +
               `y2="${fmt(py)}" stroke="#ddd"/>`);
    parts.push(`<text x="${MARGIN.left - 9}" y="${fmt(py + 4)}" ` +
               `text-anchor="end">${fmt(t)}</text>`);
  }
  parts.push(`<line x1="${MARGIN.left}" y1="${plotBottom}" x2="${plotRight}" ` +
             `y2="${plotBottom}" stroke="#333"/>`);
  parts.push(`<line x1="${MARGIN.left}" y1="${MARGIN.top}" ` +
             `x2="${MARGIN.left}" y2="${plotBottom}" stroke="#333"/>`);
  parts.push(`<text x="${(MARGIN.left + plotRight) / 2}" y="${HEIGHT - 10}" ` +
             `text-anchor="middle">${esc(spec.xlabel)}</text>`);
  parts.push(`<text x="16" y="${(MARGIN.top + plotBottom) / 2}" ` +
             `text-anchor="middle" transform="rotate(-90 16 ` +
             `${(MARGIN.top + plotBottom) / 2})">${esc(spec.ylabel)}</text>`);

  spec.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const pts = [...series.points].sort((a, b) => a.x - b.x);
    const d: string[] = [];
    pts.forEach((p, i) => {
      const px = fmt(sx.map(p.x));
      const py = fmt(sy.map(p.y));
      if (i === 0) {
        d.push(`M ${px} ${py}`);
      } else if (series.style === "step") {
        d.push(`H ${px} V ${py}`);
      } else {
        d.push(`L ${px} ${py}`);
      }
    });
    parts.push(`<path class="series" fill="none" stroke="${color}" ` +
               `stroke-width="1.8" d="${d.join(" ")}"/>`);
    for (const p of pts) {
      const px = fmt(sx.map(p.x));
      parts.push(`<circle cx="${px}" cy="${fmt(sy.map(p.y))}" r="2.6" ` +
                 `fill="${color}"/>`);
      if (p.err && p.err > 0) {
        const y0 = fmt(sy.map(p.y - p.err));
        const y1 = fmt(sy.map(p.y + p.err));
        parts.push(`<line class="errorbar" x1="${px}" y1="${y0}" ` +
                   `x2="${px}" y2="${y1}" stroke="${color}"/>`);
      }
    }
    const ly = MARGIN.top + 10 + idx * 18;
    parts.push(`<line x1="${plotRight + 12}" y1="${ly}" ` +
               `x2="${plotRight + 34}" y2="${ly}" stroke="${color}" ` +
               `stroke-width="1.8"/>`);
    parts.push(`<text x="${plotRight + 40}" y="${ly + 4}">` +
               `${esc(series.name)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
