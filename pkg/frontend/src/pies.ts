/**
 * Pie plans for the day/night class distributions.
 *
 * Slice angles come straight from the API's percentages field (never
 * recomputed from counts), slices are ordered by class ordinal, and each
 * legend line is the formatted percentage followed by the label, e.g.
 * "62.5% low". A partition with no events renders a "no data" placeholder.
 */

import { classColor, ordinalForLabel } from "./colors.js";
import { formatPercent } from "./format.js";
import type { Distribution, StatsResponse } from "./types.js";

export interface PieSlice {
  label: string;
  color: string;
  pct: number;
  count: number;
  startAngle: number;
  endAngle: number;
  legend: string;
}

export interface PiePlan {
  title: string;
  total: number;
  empty: boolean;
  slices: PieSlice[];
}

export function piePlan(title: string, dist: Distribution): PiePlan {
  if (dist.total === 0) {
    return { title, total: 0, empty: true, slices: [] };
  }
  const labels = Object.keys(dist.percentages).sort(
    (a, b) => ordinalForLabel(a) - ordinalForLabel(b),
  );
  const slices: PieSlice[] = [];
  let angle = 0;
  for (const label of labels) {
    const pct = dist.percentages[label] as number;
    const sweep = (pct / 100) * 360;
    slices.push({
      label,
      color: classColor(ordinalForLabel(label)),
      pct,
      count: dist.counts[label] ?? 0,
      startAngle: angle,
      endAngle: angle + sweep,
      legend: `${formatPercent(pct)} ${label}`,
    });
    angle += sweep;
  }
  return { title, total: dist.total, empty: false, slices };
}

/** The three pies of the stats pane, in display order. */
export function statsPies(stats: StatsResponse): PiePlan[] {
  return [
    piePlan("entire", stats.entire),
    piePlan("day", stats.day),
    piePlan("night", stats.night),
  ];
}

/**
 * SVG path for a pie slice; angles are degrees clockwise from 12 o'clock.
 * A sweep of (effectively) the full circle is drawn as two half arcs since
 * a single 360-degree arc collapses to nothing.
 */
export function arcPath(
  cx: number,
  cy: number,
  r: number,
  startAngle: number,
  endAngle: number,
): string {
  const point = (deg: number): [number, number] => {
    const rad = ((deg - 90) * Math.PI) / 180;
    return [cx + r * Math.cos(rad), cy + r * Math.sin(rad)];
  };
  const fmt = (n: number): string => n.toFixed(2);
  const sweep = endAngle - startAngle;
  const [x0, y0] = point(startAngle);
  if (sweep >= 360 - 1e-6) {
    const [xm, ym] = point(startAngle + 180);
    return (
      `M ${fmt(x0)} ${fmt(y0)} ` +
      `A ${fmt(r)} ${fmt(r)} 0 1 1 ${fmt(xm)} ${fmt(ym)} ` +
      `A ${fmt(r)} ${fmt(r)} 0 1 1 ${fmt(x0)} ${fmt(y0)} Z`
    );
  }
  const [x1, y1] = point(endAngle);
  const largeArc = sweep > 180 ? 1 : 0;
  return (
    `M ${fmt(cx)} ${fmt(cy)} L ${fmt(x0)} ${fmt(y0)} ` +
    `A ${fmt(r)} ${fmt(r)} 0 ${largeArc} 1 ${fmt(x1)} ${fmt(y1)} Z`
  );
}
