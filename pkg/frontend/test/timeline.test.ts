import { describe, expect, it } from "vitest";

import { timelinePlan, zoomIn, zoomOut } from "../src/timeline.js";
import { parseUtcMs } from "../src/state.js";
import type { TimelineRow } from "../src/types.js";

const FROM = "2012-01-01T00:00:00Z";
const TO = "2012-01-02T00:00:00Z";

const ROWS: TimelineRow[] = [
  ["2012-01-01T00:00:00Z", 2, "low"],
  ["2012-01-01T06:00:00Z", 8, "high"],
  ["2012-01-01T12:00:00Z", 15, "extreme+"],
  ["2012-01-01T18:00:00Z", 5, "moderate"],
];

describe("zoom stepping", () => {
  it("doubles up to the cap and halves down to one", () => {
    expect(zoomIn(1)).toBe(2);
    expect(zoomIn(32)).toBe(64);
    expect(zoomIn(64)).toBe(64);
    expect(zoomOut(64)).toBe(32);
    expect(zoomOut(2)).toBe(1);
    expect(zoomOut(1)).toBe(1);
  });
});

describe("timelinePlan", () => {
  it("shows the whole window at zoom 1 with marks in place", () => {
    const plan = timelinePlan(ROWS, FROM, TO, 1, null, 640);
    expect(plan.visibleFromMs).toBe(parseUtcMs(FROM));
    expect(plan.visibleToMs).toBe(parseUtcMs(TO));
    expect(plan.marks).toHaveLength(4);
    expect(plan.marks[0]!.x).toBe(0);
    expect(plan.marks[2]!.x).toBeCloseTo(320, 6);
    expect(plan.marks[2]!.color).toBe("#951e1e");
  });

  it("halves the visible span per zoom step around the center", () => {
    const center = parseUtcMs("2012-01-01T12:00:00Z")!;
    const plan = timelinePlan(ROWS, FROM, TO, 2, center, 640);
    expect(plan.visibleToMs - plan.visibleFromMs).toBe(12 * 3600 * 1000);
    expect(plan.visibleFromMs).toBe(parseUtcMs("2012-01-01T06:00:00Z"));
    expect(plan.marks.map((m) => m.label)).toEqual(["high", "extreme+", "moderate"]);
  });

  it("clamps the zoomed span inside the query window", () => {
    const nearEnd = parseUtcMs("2012-01-01T23:00:00Z")!;
    const plan = timelinePlan(ROWS, FROM, TO, 4, nearEnd, 640);
    expect(plan.visibleToMs).toBe(parseUtcMs(TO));
    expect(plan.visibleToMs - plan.visibleFromMs).toBe(6 * 3600 * 1000);
  });

  it("labels ticks across the visible span", () => {
    const plan = timelinePlan(ROWS, FROM, TO, 1, null, 640, 4);
    expect(plan.ticks).toHaveLength(5);
    expect(plan.ticks[0]!.text).toBe("2012-01-01 00:00Z");
    expect(plan.ticks[4]!.text).toBe("2012-01-02 00:00Z");
    expect(plan.ticks[2]!.x).toBeCloseTo(320, 6);
  });

  it("returns an inert plan for an invalid window", () => {
    const plan = timelinePlan(ROWS, "bad", TO, 1, null, 640);
    expect(plan.marks).toEqual([]);
    expect(plan.ticks).toEqual([]);
  });
});
