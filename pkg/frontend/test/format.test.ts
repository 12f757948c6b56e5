import { describe, expect, it } from "vitest";

import { formatPercent, hourMinute, shortUtc } from "../src/format.js";

describe("formatPercent", () => {
  it("strips a trailing .0 from whole percentages", () => {
    expect(formatPercent(15)).toBe("15%");
    expect(formatPercent(100)).toBe("100%");
    expect(formatPercent(0)).toBe("0%");
  });

  it("keeps one decimal place otherwise", () => {
    expect(formatPercent(62.5)).toBe("62.5%");
    expect(formatPercent(22.5)).toBe("22.5%");
    expect(formatPercent(100 / 3)).toBe("33.3%");
    expect(formatPercent(200 / 3)).toBe("66.7%");
  });

  it("rejects non-finite input", () => {
    expect(() => formatPercent(Number.NaN)).toThrow(RangeError);
    expect(() => formatPercent(Number.POSITIVE_INFINITY)).toThrow(RangeError);
  });
});

describe("timestamp reshaping", () => {
  it("shortens canonical UTC stamps", () => {
    expect(shortUtc("2012-01-01T12:00:00Z")).toBe("2012-01-01 12:00Z");
    expect(shortUtc("2012-01-31T23:50:00Z")).toBe("2012-01-31 23:50Z");
  });

  it("passes unrecognized text through unchanged", () => {
    expect(shortUtc("not a time")).toBe("not a time");
  });

  it("extracts the wall-clock part", () => {
    expect(hourMinute("2012-01-01T12:30:00Z")).toBe("12:30");
  });
});
