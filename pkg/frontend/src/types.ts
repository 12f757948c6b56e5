/**
 * Wire types for the fire-weather HTTP API.
 *
 * These mirror the JSON bodies the backend emits; the UI never invents
 * fields of its own, so every interface here is traceable to a response.
 */

export interface WindowRange {
  from: string;
  to: string;
}

export interface Frame {
  time: string;
  bbox: number[];
  nx: number;
  ny: number;
  empty: boolean;
  values: number[][];
  labels: string[][];
}

export interface EventRow {
  event: string;
  node: string;
  time: string;
  ordinal: number;
  label: string;
  rule: string;
  lat: number | null;
  lon: number | null;
}

export interface FwiResponse {
  window: WindowRange;
  bbox: number[];
  nx: number;
  ny: number;
  stride: number;
  frames: Frame[];
  events: EventRow[];
  gaps: WindowRange[];
}

export interface Distribution {
  total: number;
  counts: Record<string, number>;
  percentages: Record<string, number>;
}

export interface StatsResponse {
  window: WindowRange;
  day_window: { start: string; end: string; utc_offset_minutes: number };
  entire: Distribution;
  day: Distribution;
  night: Distribution;
}

/** /fwi/timeline rows: [utc time, class ordinal, class label]. */
export type TimelineRow = [string, number, string];

export interface NodeInfo {
  id: string;
  lat: number;
  lon: number;
}

export interface NodesResponse {
  nodes: NodeInfo[];
  bbox: number[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}
