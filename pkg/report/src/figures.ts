/**
 * Figure renderers over the simulator's CSV outputs.
 *
 * Every renderer is a pure function of its parsed inputs and options; the
 * SVG layer uses fixed styling and stable formatting, so reruns on the
 * same data produce identical bytes.
 */

import type { ConvergenceRow, SnapshotTable } from "./csv.js";
import { snapshotStates } from "./csv.js";
import { isoSegments } from "./contour.js";
import {
  fitLine, histogram, kde1d, kde2d, linspace, mean, scottBandwidth,
} from "./stats.js";
import {
  densityColor, fmtTick, makeFrame, niceTicks, PALETTE, SvgDoc,
} from "./svg.js";

const log2 = (v: number) => Math.log(v) / Math.LN2;

export interface ConvergenceOptions {
  title?: string;
}

interface SchemeCurve {
  scheme: string;
  points: Array<[number, number]>; // (log2 dt, log2 pooled mse)
  slope: number;
}

/** RMS-pool seeds per (scheme, dt) and drop diverged cells. */
function poolCurves(rows: ConvergenceRow[]): {
  curves: SchemeCurve[];
  omitted: string[];
} {
  const bySchemeDt = new Map<string, Map<number, number[]>>();
  for (const r of rows) {
    if (r.diverged || !Number.isFinite(r.mse) || r.mse <= 0) continue;
    const perDt = bySchemeDt.get(r.scheme) ?? new Map<number, number[]>();
    const arr = perDt.get(r.dt) ?? [];
    arr.push(r.mse);
    perDt.set(r.dt, arr);
    bySchemeDt.set(r.scheme, perDt);
  }
  const allSchemes = [...new Set(rows.map((r) => r.scheme))].sort();
  const curves: SchemeCurve[] = [];
  const omitted: string[] = [];
  for (const scheme of allSchemes) {
    const perDt = bySchemeDt.get(scheme);
    const pts: Array<[number, number]> = [];
    if (perDt) {
      for (const [dt, mses] of
           [...perDt.entries()].sort((a, b) => b[0] - a[0])) {
        const rms = Math.sqrt(mean(mses.map((m) => m * m)));
        pts.push([log2(dt), log2(rms)]);
      }
    }
    if (pts.length < 2) {
      omitted.push(scheme);
      continue;
    }
    const fit = fitLine(pts.map((p) => p[0]), pts.map((p) => p[1]));
    curves.push({ scheme, points: pts, slope: fit.slope });
  }
  return { curves, omitted };
}

export function renderConvergence(
  rows: ConvergenceRow[],
  opts: ConvergenceOptions = {},
): string {
  const { curves, omitted } = poolCurves(rows);
  if (curves.length === 0) {
    throw new Error("no scheme has two finite records to plot");
  }
  const xs = curves.flatMap((c) => c.points.map((p) => p[0]));
  const ys = curves.flatMap((c) => c.points.map((p) => p[1]));
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);

  // reference slopes anchored at the coarsest measured point
  const anchorX = x1;
  const anchorY = mean(curves.map((c) => c.points[0][1]));
  const refs = [
    { slope: 1.0, label: "slope 1" },
    { slope: 0.5, label: "slope 1/2" },
  ].map((r) => ({
    ...r,
    pts: [
      [x0, anchorY - r.slope * (anchorX - x0)],
      [x1, anchorY],
    ] as Array<[number, number]>,
  }));

  const yLo = Math.min(...ys, ...refs.map((r) => r.pts[0][1]));
  const yHi = Math.max(...ys, anchorY);
  const pad = 0.05 * (yHi - yLo || 1);
  const frame = makeFrame([x0 - 0.3, x1 + 0.3], [yLo - pad, yHi + 3 * pad]);
  const doc = new SvgDoc(frame.width, frame.height);
  const intTicks = (lo: number, hi: number) => {
    const out: number[] = [];
    for (let v = Math.ceil(lo); v <= Math.floor(hi); v++) out.push(v);
    return out;
  };
  doc.axes(frame, intTicks(x0 - 0.3, x1 + 0.3),
           niceTicks(yLo - pad, yHi + 3 * pad),
           "log2 step size", "log2 error", (v) => fmtTick(v));
  doc.text((frame.x.range[0] + frame.x.range[1]) / 2, 20,
           opts.title ?? "Strong error at the terminal time",
           { anchor: "middle", size: 14 });

  for (const ref of refs) {
    doc.polyline(ref.pts.map(([x, y]) => [frame.x(x), frame.y(y)]),
                 "#888", 1, "6,4");
    doc.text(frame.x(ref.pts[0][0]) + 4, frame.y(ref.pts[0][1]) - 5,
             ref.label, { size: 11, fill: "#666" });
  }
  curves.forEach((c, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pix = c.points.map(([x, y]) =>
      [frame.x(x), frame.y(y)] as [number, number]);
    doc.polyline(pix, color, 1.8);
    for (const [px, py] of pix) doc.circle(px, py, 3, color);
  });

  // legend with fitted slopes
  const lx = frame.margin.left + 10;
  let ly = frame.margin.top + 8;
  curves.forEach((c, i) => {
    const color = PALETTE[i % PALETTE.length];
    doc.line(lx, ly, lx + 18, ly, color, 2.5);
    doc.text(lx + 24, ly + 4,
             `${c.scheme} (fitted slope ${c.slope.toFixed(2)})`,
             { size: 11 });
    ly += 15;
  });
  for (const scheme of omitted) {
    doc.text(lx + 24, ly + 4, `${scheme}: omitted (no finite records)`,
             { size: 11, fill: "#a00" });
    ly += 15;
  }
  return doc.render();
}

export interface DensityOptions {
  coord?: number;
  bins?: number;
  bandwidth?: number;
  time?: number; // defaults to the last snapshot time
  title?: string;
}

function pickTime(table: SnapshotTable, time?: number): number {
  if (time === undefined) return table.times[table.times.length - 1];
  if (!table.times.includes(time)) {
    throw new Error(
      `snapshot time ${time} not in file (have ${table.times.join(", ")})`,
    );
  }
  return time;
}

function coordColumn(
  table: SnapshotTable, time: number, coord: number,
): number[] {
  if (coord < 0 || coord >= table.dim) {
    throw new Error(`coordinate ${coord} out of range for dim ${table.dim}`);
  }
  const states = snapshotStates(table, time);
  if (states.length === 0) {
    throw new Error(`no surviving particles at time ${time}`);
  }
  return states.map((s) => s[coord]);
}

export function renderDensity1d(
  table: SnapshotTable,
  opts: DensityOptions = {},
): string {
  const time = pickTime(table, opts.time);
  const xs = coordColumn(table, time, opts.coord ?? 0);
  const bins = histogram(xs, opts.bins ?? 40);
  const bw = opts.bandwidth ?? scottBandwidth(xs);
  const lo = bins[0].start;
  const hi = bins[bins.length - 1].end;
  const grid = linspace(lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo), 240);
  const dens = kde1d(xs, grid, bw);
  const yMax = Math.max(...bins.map((b) => b.density), ...dens) * 1.1;

  const frame = makeFrame([grid[0], grid[grid.length - 1]], [0, yMax]);
  const doc = new SvgDoc(frame.width, frame.height);
  doc.axes(frame, niceTicks(grid[0], grid[grid.length - 1]),
           niceTicks(0, yMax), `coordinate ${opts.coord ?? 0}`, "density");
  doc.text((frame.x.range[0] + frame.x.range[1]) / 2, 20,
           opts.title ?? `Empirical density at t = ${time}`,
           { anchor: "middle", size: 14 });
  for (const b of bins) {
    if (b.density === 0) continue;
    doc.rect(frame.x(b.start), frame.y(b.density),
             frame.x(b.end) - frame.x(b.start),
             frame.y(0) - frame.y(b.density), "#9ecae1");
  }
  doc.polyline(grid.map((g, i) =>
    [frame.x(g), frame.y(dens[i])] as [number, number]), "#d62728", 2);
  doc.text(frame.x.range[1] - 4, frame.margin.top + 10,
           `n = ${xs.length}, bandwidth ${bw.toPrecision(3)}`,
           { anchor: "end", size: 11, fill: "#666" });
  return doc.render();
}

export interface Density2dOptions {
  coords?: [number, number];
  gridSize?: number;
  time?: number;
  title?: string;
}

export function renderDensity2d(
  table: SnapshotTable,
  opts: Density2dOptions = {},
): string {
  const time = pickTime(table, opts.time);
  const [cx, cy] = opts.coords ?? [0, 1];
  const xs = coordColumn(table, time, cx);
  const ys = coordColumn(table, time, cy);
  const grid = kde2d(xs.map((x, i) => [x, ys[i]]), opts.gridSize ?? 70,
                     opts.gridSize ?? 60);
  const peak = Math.max(...grid.values.flat());

  const frame = makeFrame(
    [grid.x[0], grid.x[grid.x.length - 1]],
    [grid.y[0], grid.y[grid.y.length - 1]],
  );
  const doc = new SvgDoc(frame.width, frame.height);
  const cw = frame.x(grid.x[1]) - frame.x(grid.x[0]);
  const ch = frame.y(grid.y[0]) - frame.y(grid.y[1]);
  for (let iy = 0; iy < grid.y.length; iy++) {
    for (let ix = 0; ix < grid.x.length; ix++) {
      doc.rect(frame.x(grid.x[ix]) - cw / 2, frame.y(grid.y[iy]) - ch / 2,
               cw + 0.5, ch + 0.5,
               densityColor(grid.values[iy][ix] / peak));
    }
  }
  doc.axes(frame, niceTicks(...frame.x.domain), niceTicks(...frame.y.domain),
           `coordinate ${cx}`, `coordinate ${cy}`);
  doc.text((frame.x.range[0] + frame.x.range[1]) / 2, 20,
           opts.title ?? `Empirical density surface at t = ${time}`,
           { anchor: "middle", size: 14 });
  return doc.render();
}

export interface Marginals3dOptions {
  levels?: number[]; // fractions of the peak density
  time?: number;
  title?: string;
}

export function renderMarginals3d(
  table: SnapshotTable,
  opts: Marginals3dOptions = {},
): string {
  if (table.dim < 3) {
    throw new Error(`pairwise marginals need dim >= 3, got ${table.dim}`);
  }
  const time = pickTime(table, opts.time);
  const levels = opts.levels ?? [0.2, 0.5];
  const pairs: Array<[number, number]> = [[0, 1], [0, 2], [1, 2]];
  const panel = 300;
  const width = panel * pairs.length;
  const height = panel + 60;
  const doc = new SvgDoc(width, height);
  doc.text(width / 2, 20,
           opts.title ?? `Pairwise marginal contours at t = ${time}`,
           { anchor: "middle", size: 14 });

  pairs.forEach(([ca, cb], pi) => {
    const xs = coordColumn(table, time, ca);
    const ys = coordColumn(table, time, cb);
    const grid = kde2d(xs.map((x, i) => [x, ys[i]]), 50, 50);
    const peak = Math.max(...grid.values.flat());
    const margin = { top: 40, right: 16, bottom: 42, left: 48 };
    const xScale = (v: number) =>
      pi * panel + margin.left +
      ((v - grid.x[0]) / (grid.x[grid.x.length - 1] - grid.x[0])) *
        (panel - margin.left - margin.right);
    const yScale = (v: number) =>
      height - margin.bottom -
      ((v - grid.y[0]) / (grid.y[grid.y.length - 1] - grid.y[0])) *
        (height - margin.top - margin.bottom - 18);
    levels.forEach((f, li) => {
      const segs = isoSegments(grid, f * peak);
      const color = PALETTE[li % PALETTE.length];
      for (const [[xa, ya], [xb, yb]] of segs) {
        doc.line(xScale(xa), yScale(ya), xScale(xb), yScale(yb), color, 1.3);
      }
    });
    doc.text(pi * panel + panel / 2, height - 8,
             `coord ${ca} vs coord ${cb}`, { anchor: "middle", size: 12 });
  });
  const legendY = 34;
  levels.forEach((f, li) => {
    const lx = 16 + li * 150;
    doc.line(lx, legendY, lx + 18, legendY, PALETTE[li % PALETTE.length], 2);
    doc.text(lx + 24, legendY + 4, `${Math.round(f * 100)}% of peak`,
             { size: 11 });
  });
  return doc.render();
}

export interface TrajectoryOptions {
  coord?: number;
  maxParticles?: number;
  title?: string;
}

export function renderTrajectories(
  table: SnapshotTable,
  opts: TrajectoryOptions = {},
): string {
  if (table.times.length < 2) {
    throw new Error("trajectory fan needs at least two snapshot times");
  }
  const coord = opts.coord ?? 0;
  if (coord < 0 || coord >= table.dim) {
    throw new Error(`coordinate ${coord} out of range for dim ${table.dim}`);
  }
  const byParticle = new Map<number, Array<[number, number]>>();
  for (const r of table.rows) {
    const arr = byParticle.get(r.particle) ?? [];
    arr.push([r.time, r.coords[coord]]);
    byParticle.set(r.particle, arr);
  }
  const ids = [...byParticle.keys()].sort((a, b) => a - b)
    .slice(0, opts.maxParticles ?? 200);
  const values = ids.flatMap((id) => byParticle.get(id)!.map((p) => p[1]));
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const pad = 0.05 * (hi - lo || 1);
  const frame = makeFrame(
    [table.times[0], table.times[table.times.length - 1]],
    [lo - pad, hi + pad],
  );
  const doc = new SvgDoc(frame.width, frame.height);
  doc.axes(frame, niceTicks(...frame.x.domain), niceTicks(...frame.y.domain),
           "time", `coordinate ${coord}`);
  doc.text((frame.x.range[0] + frame.x.range[1]) / 2, 20,
           opts.title ?? `Trajectory fan (${ids.length} particles)`,
           { anchor: "middle", size: 14 });
  ids.forEach((id, i) => {
    const pts = byParticle.get(id)!
      .sort((a, b) => a[0] - b[0])
      .map(([t, v]) => [frame.x(t), frame.y(v)] as [number, number]);
    doc.polyline(pts, PALETTE[i % PALETTE.length], 0.8);
  });
  return doc.render();
}
