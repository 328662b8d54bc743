/**
 * Marching-squares iso-lines on a regular grid.
 *
 * Returns one array of line segments per level; segments are emitted in
 * row-major cell order, so output is deterministic.
 */

import type { Grid2d } from "./stats.js";

export type Segment = [[number, number], [number, number]];

function interp(
  va: number, vb: number, a: number, b: number, level: number,
): number {
  const t = (level - va) / (vb - va);
  return a + t * (b - a);
}

export function isoSegments(grid: Grid2d, level: number): Segment[] {
  const { x, y, values } = grid;
  const segments: Segment[] = [];
  for (let iy = 0; iy < y.length - 1; iy++) {
    for (let ix = 0; ix < x.length - 1; ix++) {
      const v00 = values[iy][ix];
      const v10 = values[iy][ix + 1];
      const v01 = values[iy + 1][ix];
      const v11 = values[iy + 1][ix + 1];
      let caseId = 0;
      if (v00 >= level) caseId |= 1;
      if (v10 >= level) caseId |= 2;
      if (v11 >= level) caseId |= 4;
      if (v01 >= level) caseId |= 8;
      if (caseId === 0 || caseId === 15) continue;

      // crossing points on the four cell edges
      const bottom: [number, number] = [
        interp(v00, v10, x[ix], x[ix + 1], level), y[iy]];
      const top: [number, number] = [
        interp(v01, v11, x[ix], x[ix + 1], level), y[iy + 1]];
      const left: [number, number] = [
        x[ix], interp(v00, v01, y[iy], y[iy + 1], level)];
      const right: [number, number] = [
        x[ix + 1], interp(v10, v11, y[iy], y[iy + 1], level)];

      switch (caseId) {
        case 1: case 14: segments.push([left, bottom]); break;
        case 2: case 13: segments.push([bottom, right]); break;
        case 3: case 12: segments.push([left, right]); break;
        case 4: case 11: segments.push([top, right]); break;
        case 6: case 9: segments.push([bottom, top]); break;
        case 7: case 8: segments.push([left, top]); break;
        case 5:
          segments.push([left, bottom]);
          segments.push([top, right]);
          break;
        case 10:
          segments.push([left, top]);
          segments.push([bottom, right]);
          break;
      }
    }
  }
  return segments;
}
