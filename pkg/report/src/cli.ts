#!/usr/bin/env node
/**
 * Figure CLI: `report <figure-kind> --in <csv...> --out <file> [options]`
 *
 * Kinds: convergence | trajectories | density1d | density2d | marginals3d.
 * Inputs are the simulator's CSV files; output is a deterministic SVG.
 */

import { realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { parseConvergenceCsv, parseSnapshotCsv } from "./csv.js";
import {
  renderConvergence, renderDensity1d, renderDensity2d, renderMarginals3d,
  renderTrajectories,
} from "./figures.js";

const KINDS = [
  "convergence", "trajectories", "density1d", "density2d", "marginals3d",
];

export interface CliArgs {
  kind: string;
  inputs: string[];
  out: string;
  options: Map<string, string>;
}

export function parseArgs(argv: string[]): CliArgs {
  if (argv.length === 0) {
    throw new Error(`usage: report <${KINDS.join("|")}> --in <csv...> ` +
      "--out <file> [--coord N] [--coords A,B] [--bins N] " +
      "[--bandwidth H] [--time T] [--title S] [--max-particles N]");
  }
  const [kind, ...rest] = argv;
  if (!KINDS.includes(kind)) {
    throw new Error(`unknown figure kind ${kind}; expected one of ` +
      KINDS.join(", "));
  }
  const inputs: string[] = [];
  let out = "";
  const options = new Map<string, string>();
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${arg}`);
    }
    const name = arg.slice(2);
    if (name === "in") {
      while (i + 1 < rest.length && !rest[i + 1].startsWith("--")) {
        inputs.push(rest[++i]);
      }
    } else {
      const value = rest[++i];
      if (value === undefined) throw new Error(`missing value for --${name}`);
      if (name === "out") out = value;
      else options.set(name, value);
    }
  }
  if (inputs.length === 0) throw new Error("need at least one --in file");
  if (!out) throw new Error("need --out <file>");
  return { kind, inputs, out, options };
}

function num(options: Map<string, string>, key: string): number | undefined {
  const v = options.get(key);
  if (v === undefined) return undefined;
  const parsed = Number(v);
  if (!Number.isFinite(parsed)) throw new Error(`--${key} expects a number`);
  return parsed;
}

export function renderFromArgs(args: CliArgs): string {
  const { kind, inputs, options } = args;
  const title = options.get("title");
  if (kind === "convergence") {
    const rows = inputs.flatMap(parseConvergenceCsv);
    return renderConvergence(rows, { title });
  }
  if (inputs.length !== 1) {
    throw new Error(`${kind} takes exactly one snapshot CSV`);
  }
  const table = parseSnapshotCsv(inputs[0]);
  const time = num(options, "time");
  switch (kind) {
    case "density1d":
      return renderDensity1d(table, {
        coord: num(options, "coord"),
        bins: num(options, "bins"),
        bandwidth: num(options, "bandwidth"),
        time, title,
      });
    case "density2d": {
      const coordsOpt = options.get("coords");
      let coords: [number, number] | undefined;
      if (coordsOpt !== undefined) {
        const parts = coordsOpt.split(",").map(Number);
        if (parts.length !== 2 || parts.some((p) => !Number.isInteger(p))) {
          throw new Error("--coords expects two indices like 0,1");
        }
        coords = [parts[0], parts[1]];
      }
      return renderDensity2d(table, {
        coords, gridSize: num(options, "grid-size"), time, title,
      });
    }
    case "marginals3d":
      return renderMarginals3d(table, { time, title });
    case "trajectories":
      return renderTrajectories(table, {
        coord: num(options, "coord"),
        maxParticles: num(options, "max-particles"),
        title,
      });
  }
  throw new Error(`unhandled figure kind ${kind}`);
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const svg = renderFromArgs(args);
    writeFileSync(args.out, svg);
    console.log(`report: wrote ${args.out}`);
    return 0;
  } catch (err) {
    console.error(`report: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

const invokedDirectly = (() => {
  if (process.argv[1] === undefined) return false;
  try {
    // argv[1] may be an npm bin symlink; import.meta.url is the real path
    return import.meta.url ===
      pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
})();
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
