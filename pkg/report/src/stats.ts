/** Small numeric helpers: least squares, histograms, kernel densities. */

export interface LineFit {
  slope: number;
  intercept: number;
  residualNorm: number;
}

export function fitLine(xs: number[], ys: number[]): LineFit {
  const n = xs.length;
  if (n < 2 || ys.length !== n) {
    throw new Error(`need at least 2 points to fit a line, got ${n}`);
  }
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  let res = 0;
  for (let i = 0; i < n; i++) {
    const e = ys[i] - (intercept + slope * xs[i]);
    res += e * e;
  }
  return { slope, intercept, residualNorm: Math.sqrt(res) };
}

export function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

export function stddev(xs: number[]): number {
  const m = mean(xs);
  const v = xs.reduce((a, b) => a + (b - m) * (b - m), 0) /
    Math.max(1, xs.length - 1);
  return Math.sqrt(v);
}

export interface HistogramBin {
  start: number;
  end: number;
  density: number;
}

export function histogram(xs: number[], nBins: number): HistogramBin[] {
  if (xs.length === 0) throw new Error("cannot histogram an empty sample");
  let lo = Math.min(...xs);
  let hi = Math.max(...xs);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const width = (hi - lo) / nBins;
  const counts = new Array<number>(nBins).fill(0);
  for (const x of xs) {
    const idx = Math.min(Math.floor((x - lo) / width), nBins - 1);
    counts[idx]++;
  }
  const norm = xs.length * width;
  return counts.map((c, i) => ({
    start: lo + i * width,
    end: lo + (i + 1) * width,
    density: c / norm,
  }));
}

/** Scott's bandwidth for a one-dimensional Gaussian KDE. */
export function scottBandwidth(xs: number[]): number {
  const s = stddev(xs);
  const sigma = s > 0 ? s : 1.0;
  return sigma * Math.pow(xs.length, -1 / 5);
}

export function kde1d(
  xs: number[],
  grid: number[],
  bandwidth?: number,
): number[] {
  const h = bandwidth ?? scottBandwidth(xs);
  const norm = 1 / (xs.length * h * Math.sqrt(2 * Math.PI));
  return grid.map((g) => {
    let acc = 0;
    for (const x of xs) {
      const u = (g - x) / h;
      acc += Math.exp(-0.5 * u * u);
    }
    return acc * norm;
  });
}

export interface Grid2d {
  x: number[];
  y: number[];
  values: number[][]; // values[iy][ix]
}

/** Product-kernel Gaussian KDE on a regular grid (Scott's rule per axis). */
export function kde2d(
  points: Array<[number, number]>,
  nx: number,
  ny: number,
  padFraction = 0.1,
): Grid2d {
  if (points.length === 0) throw new Error("cannot estimate an empty sample");
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const n = points.length;
  const factor = Math.pow(n, -1 / 6); // Scott in two dimensions
  const hx = (stddev(xs) || 1.0) * factor;
  const hy = (stddev(ys) || 1.0) * factor;
  const [x0, x1] = padded(Math.min(...xs), Math.max(...xs), padFraction);
  const [y0, y1] = padded(Math.min(...ys), Math.max(...ys), padFraction);
  const gx = linspace(x0, x1, nx);
  const gy = linspace(y0, y1, ny);
  const norm = 1 / (n * 2 * Math.PI * hx * hy);
  const values = gy.map((yv) =>
    gx.map((xv) => {
      let acc = 0;
      for (const [px, py] of points) {
        const u = (xv - px) / hx;
        const v = (yv - py) / hy;
        acc += Math.exp(-0.5 * (u * u + v * v));
      }
      return acc * norm;
    })
  );
  return { x: gx, y: gy, values };
}

export function linspace(a: number, b: number, n: number): number[] {
  const out = new Array<number>(n);
  for (let i = 0; i < n; i++) out[i] = a + ((b - a) * i) / (n - 1);
  return out;
}

function padded(lo: number, hi: number, f: number): [number, number] {
  const span = hi - lo || 1.0;
  return [lo - f * span, hi + f * span];
}

/** Indices of strict local maxima above a fraction of the global maximum. */
export function findModes(values: number[], minFraction = 0.2): number[] {
  const peak = Math.max(...values);
  const out: number[] = [];
  for (let i = 1; i < values.length - 1; i++) {
    if (
      values[i] > values[i - 1] &&
      values[i] >= values[i + 1] &&
      values[i] >= minFraction * peak
    ) {
      out.push(i);
    }
  }
  return out;
}
