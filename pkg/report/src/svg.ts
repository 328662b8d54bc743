/**
 * Deterministic SVG assembly: fixed styling, stable number formatting, no
 * timestamps or random ids, so identical inputs give identical bytes.
 */

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#17becf", "#7f7f7f",
];

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const r = Math.round(x * 100) / 100;
  return Object.is(r, -0) ? "0" : String(r);
}

export function fmtTick(x: number): string {
  if (x === 0) return "0";
  const ax = Math.abs(x);
  if (ax >= 1e4 || ax < 1e-3) return x.toExponential(1);
  return String(Math.round(x * 1000) / 1000);
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

export function niceTicks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo || 1;
  const step0 = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const norm = step0 / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
  x: Scale;
  y: Scale;
}

export function makeFrame(
  xDomain: [number, number],
  yDomain: [number, number],
  width = 640,
  height = 440,
  margin = { top: 34, right: 20, bottom: 46, left: 62 },
): Frame {
  return {
    width,
    height,
    margin,
    x: linearScale(xDomain, [margin.left, width - margin.right]),
    y: linearScale(yDomain, [height - margin.bottom, margin.top]),
  };
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}" ` +
        `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string,
       width = 1, dash?: string): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" ` +
        `y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5,
           dash?: string): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${coords}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}"${d}/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${fill}"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" ` +
        `height="${fmt(h)}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, s: string, opts: {
    size?: number; anchor?: string; fill?: string; rotate?: boolean;
  } = {}): void {
    const size = opts.size ?? 12;
    const anchor = opts.anchor ?? "start";
    const fill = opts.fill ?? "#222";
    const rot = opts.rotate
      ? ` transform="rotate(-90 ${fmt(x)} ${fmt(y)})"`
      : "";
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
        `text-anchor="${anchor}" fill="${fill}"${rot}>${escapeXml(s)}</text>`,
    );
  }

  axes(frame: Frame, xTicks: number[], yTicks: number[], xLabel: string,
       yLabel: string, tickFormat: (v: number) => string = fmtTick): void {
    const { x, y, margin, width, height } = frame;
    const bottom = height - margin.bottom;
    this.line(margin.left, bottom, width - margin.right, bottom, "#222");
    this.line(margin.left, margin.top, margin.left, bottom, "#222");
    for (const t of xTicks) {
      const px = x(t);
      this.line(px, bottom, px, bottom + 4, "#222");
      this.line(px, margin.top, px, bottom, "#eee");
      this.text(px, bottom + 17, tickFormat(t), { anchor: "middle",
                                                  size: 11 });
    }
    for (const t of yTicks) {
      const py = y(t);
      this.line(margin.left - 4, py, margin.left, py, "#222");
      this.line(margin.left, py, width - margin.right, py, "#eee");
      this.text(margin.left - 7, py + 4, tickFormat(t), { anchor: "end",
                                                          size: 11 });
    }
    this.text((margin.left + width - margin.right) / 2, height - 10, xLabel,
              { anchor: "middle" });
    this.text(16, (margin.top + bottom) / 2, yLabel,
              { anchor: "middle", rotate: true });
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Fixed five-stop dark-blue-to-yellow ramp for density surfaces. */
export function densityColor(t: number): string {
  const stops: Array<[number, number, number]> = [
    [13, 8, 135], [126, 3, 168], [204, 71, 120], [248, 149, 64],
    [240, 249, 33],
  ];
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(pos));
  const frac = pos - i;
  const mix = stops[i].map((c, k) =>
    Math.round(c + frac * (stops[i + 1][k] - c))
  );
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}
