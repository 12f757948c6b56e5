/**
 * Map overlay plans: one colored raster per frame, gap frames hatched.
 *
 * These are pure geometry builders; main.ts turns the plans into SVG. Frame
 * rows arrive south-first from the API, so row j is drawn at the bottom of
 * the viewport and latitude grows upward.
 */

import { classColor, ordinalForLabel } from "./colors.js";
import type { Frame, FwiResponse, NodeInfo } from "./types.js";

export interface CellPlan {
  x: number;
  y: number;
  w: number;
  h: number;
  fill: string;
  label: string;
  value: number;
}

export interface FramePlan {
  time: string;
  hatched: boolean;
  cells: CellPlan[];
}

/** Project a geographic point into a width-by-height viewport (north up). */
export function project(
  lat: number,
  lon: number,
  bbox: readonly number[],
  width: number,
  height: number,
): { x: number; y: number } {
  const [south, west, north, east] = bbox as [number, number, number, number];
  const x = ((lon - west) / (east - west)) * width;
  const y = height - ((lat - south) / (north - south)) * height;
  return { x, y };
}

/**
 * The drawable form of one frame. An empty frame (a coverage gap) renders as
 * a hatched pane with no cells rather than a blank or stale raster.
 */
export function framePlan(frame: Frame, width: number, height: number): FramePlan {
  if (frame.empty) {
    return { time: frame.time, hatched: true, cells: [] };
  }
  const cw = width / frame.nx;
  const ch = height / frame.ny;
  const cells: CellPlan[] = [];
  frame.labels.forEach((labelRow, j) => {
    const valueRow = frame.values[j] ?? [];
    labelRow.forEach((label, i) => {
      cells.push({
        x: i * cw,
        y: height - (j + 1) * ch,
        w: cw,
        h: ch,
        fill: classColor(ordinalForLabel(label)),
        label,
        value: valueRow[i] ?? NaN,
      });
    });
  });
  return { time: frame.time, hatched: false, cells };
}

/** One playback step per response frame, labeled with the frame's timestamp. */
export function animationSteps(response: FwiResponse): string[] {
  return response.frames.map((f) => f.time);
}

export interface MarkerPlan {
  id: string;
  x: number;
  y: number;
}

/** Node markers that fall inside the bbox, projected into the viewport. */
export function nodeMarkers(
  nodes: NodeInfo[],
  bbox: readonly number[],
  width: number,
  height: number,
): MarkerPlan[] {
  const [south, west, north, east] = bbox as [number, number, number, number];
  return nodes
    .filter((n) => n.lat >= south && n.lat <= north && n.lon >= west && n.lon <= east)
    .map((n) => ({ id: n.id, ...project(n.lat, n.lon, bbox, width, height) }));
}
