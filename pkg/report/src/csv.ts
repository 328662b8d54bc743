/**
 * Readers for the simulator's CSV outputs.
 *
 * Two schemas are understood:
 *  - convergence studies: model,scheme,taming,dt,ref_dt,N,seed,mse,diverged,wallclock_s
 *  - particle snapshots:  time,particle,coord_0..coord_{d-1},blown_up
 *
 * Snapshot files may carry a sidecar `<file>.meta.json` whose
 * schema_version is checked when present.
 */

import { existsSync, readFileSync } from "node:fs";

export const SNAPSHOT_SCHEMA_VERSION = 1;

const CONVERGENCE_HEADER = [
  "model", "scheme", "taming", "dt", "ref_dt", "N", "seed", "mse",
  "diverged", "wallclock_s",
];

export interface ConvergenceRow {
  model: string;
  scheme: string;
  taming: string;
  dt: number;
  refDt: number;
  n: number;
  seed: number;
  mse: number;
  diverged: boolean;
}

export interface SnapshotTable {
  dim: number;
  times: number[]; // sorted unique snapshot times
  rows: SnapshotRow[];
}

export interface SnapshotRow {
  time: number;
  particle: number;
  coords: number[];
  blownUp: boolean;
}

function splitCsv(text: string): string[][] {
  // the simulator never quotes fields, so a plain split is exact
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

export function parseConvergenceCsv(path: string): ConvergenceRow[] {
  const lines = splitCsv(readFileSync(path, "utf-8"));
  if (lines.length === 0) {
    throw new Error(`empty convergence CSV: ${path}`);
  }
  const header = lines[0];
  if (header.join(",") !== CONVERGENCE_HEADER.join(",")) {
    throw new Error(
      `unexpected convergence CSV header in ${path}: ${header.join(",")}`,
    );
  }
  return lines.slice(1).map((f) => ({
    model: f[0],
    scheme: f[1],
    taming: f[2],
    dt: Number(f[3]),
    refDt: Number(f[4]),
    n: Number(f[5]),
    seed: Number(f[6]),
    mse: Number(f[7]),
    diverged: f[8] === "1",
  }));
}

export function parseSnapshotCsv(path: string): SnapshotTable {
  const metaPath = `${path}.meta.json`;
  if (existsSync(metaPath)) {
    const meta = JSON.parse(readFileSync(metaPath, "utf-8"));
    if (meta.schema_version !== SNAPSHOT_SCHEMA_VERSION) {
      throw new Error(
        `snapshot schema version ${meta.schema_version} in ${metaPath}; ` +
          `this renderer reads version ${SNAPSHOT_SCHEMA_VERSION}`,
      );
    }
  }
  const lines = splitCsv(readFileSync(path, "utf-8"));
  if (lines.length === 0) {
    throw new Error(`empty snapshot CSV: ${path}`);
  }
  const header = lines[0];
  const coordNames = header.slice(2, header.length - 1);
  const wellFormed =
    header[0] === "time" &&
    header[1] === "particle" &&
    header[header.length - 1] === "blown_up" &&
    coordNames.length >= 1 &&
    coordNames.every((c, i) => c === `coord_${i}`);
  if (!wellFormed) {
    throw new Error(
      `unexpected snapshot CSV header in ${path}: ${header.join(",")}`,
    );
  }
  const dim = coordNames.length;
  const rows: SnapshotRow[] = lines.slice(1).map((f) => ({
    time: Number(f[0]),
    particle: Number(f[1]),
    coords: f.slice(2, 2 + dim).map(Number),
    blownUp: f[2 + dim] === "1",
  }));
  const times = [...new Set(rows.map((r) => r.time))].sort((a, b) => a - b);
  return { dim, times, rows };
}

/** States of one snapshot time, optionally dropping blown-up particles. */
export function snapshotStates(
  table: SnapshotTable,
  time: number,
  includeBlownUp = false,
): number[][] {
  return table.rows
    .filter((r) => r.time === time && (includeBlownUp || !r.blownUp))
    .map((r) => r.coords);
}
