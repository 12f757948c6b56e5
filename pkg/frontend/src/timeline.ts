/**
 * Per-node timeline plan: class marks on a zoomable time axis.
 *
 * Zoom narrows the visible span by powers of two around a center (the
 * playback cursor's timestamp when available), clamped to the query window,
 * so zooming never scrolls outside the data the view asked for.
 */

import { classColor } from "./colors.js";
import { shortUtc } from "./format.js";
import { MAX_TIMELINE_ZOOM, parseUtcMs } from "./state.js";
import type { TimelineRow } from "./types.js";

export interface TimelineMark {
  x: number;
  time: string;
  ordinal: number;
  label: string;
  color: string;
}

export interface TimelineTick {
  x: number;
  text: string;
}

export interface TimelinePlan {
  zoom: number;
  visibleFromMs: number;
  visibleToMs: number;
  marks: TimelineMark[];
  ticks: TimelineTick[];
}

export function zoomIn(zoom: number): number {
  return Math.min(zoom * 2, MAX_TIMELINE_ZOOM);
}

export function zoomOut(zoom: number): number {
  return Math.max(Math.floor(zoom / 2), 1);
}

export function timelinePlan(
  rows: TimelineRow[],
  from: string,
  to: string,
  zoom: number,
  centerMs: number | null,
  width: number,
  tickCount = 5,
): TimelinePlan {
  const fromMs = parseUtcMs(from);
  const toMs = parseUtcMs(to);
  if (fromMs === null || toMs === null || !(fromMs < toMs)) {
    return { zoom, visibleFromMs: 0, visibleToMs: 0, marks: [], ticks: [] };
  }
  const span = (toMs - fromMs) / zoom;
  const mid = centerMs ?? (fromMs + toMs) / 2;
  let visibleFrom = mid - span / 2;
  visibleFrom = Math.max(fromMs, Math.min(visibleFrom, toMs - span));
  const visibleTo = visibleFrom + span;

  const xFor = (ms: number): number => ((ms - visibleFrom) / span) * width;
  const marks: TimelineMark[] = [];
  for (const [time, ordinal, label] of rows) {
    const ms = parseUtcMs(time);
    if (ms === null || ms < visibleFrom || ms > visibleTo) {
      continue;
    }
    marks.push({ x: xFor(ms), time, ordinal, label, color: classColor(ordinal) });
  }
  const ticks: TimelineTick[] = [];
  for (let i = 0; i <= tickCount; i++) {
    const ms = visibleFrom + (span * i) / tickCount;
    ticks.push({
      x: xFor(ms),
      text: shortUtc(new Date(ms).toISOString().replace(/\.\d{3}Z$/, "Z")),
    });
  }
  return { zoom, visibleFromMs: visibleFrom, visibleToMs: visibleTo, marks, ticks };
}
