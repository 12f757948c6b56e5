/**
 * The view state: everything the UI needs to reproduce itself.
 *
 * A ViewState plus the latest API responses fully determines what is on
 * screen, so the whole state round-trips through location.hash and a reload
 * lands on the same view. Validation mirrors the server's query contract
 * (bbox ordering and ranges, grid limits, strictly ordered window) so bad
 * input is rejected before a request is ever sent.
 */

export const SLOT_MINUTES = 10;
export const MAX_GRID_CELLS = 512;
/** Frames per response are capped near one week of native slots. */
export const STRIDE_TARGET_SLOTS = 7 * 24 * 6;
export const MIN_SPEED_MS = 50;
export const MAX_SPEED_MS = 5000;
export const MAX_TIMELINE_ZOOM = 64;

export interface ViewState {
  bbox: [number, number, number, number];
  from: string;
  to: string;
  nx: number;
  ny: number;
  node: string | null;
  cursor: number;
  speedMs: number;
  timelineZoom: number;
}

export const DEFAULT_VIEW: ViewState = {
  bbox: [-28.24, 153.26, -28.22, 153.28],
  from: "2012-01-01T12:00:00Z",
  to: "2012-01-01T13:00:00Z",
  nx: 8,
  ny: 8,
  node: null,
  cursor: 0,
  speedMs: 500,
  timelineZoom: 1,
};

/** Epoch milliseconds for a UTC ISO timestamp, or null if unparsable. */
export function parseUtcMs(text: string): number | null {
  if (!/^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}(:\d{2})?(\.\d+)?Z$/.test(text.trim())) {
    return null;
  }
  const ms = Date.parse(text.trim());
  return Number.isNaN(ms) ? null : ms;
}

/** Widen [from, to] outward onto the 10-minute slot grid, as the server does. */
export function alignedWindowMs(from: string, to: string): { startMs: number; endMs: number } | null {
  const a = parseUtcMs(from);
  const b = parseUtcMs(to);
  if (a === null || b === null || !(a < b)) {
    return null;
  }
  const step = SLOT_MINUTES * 60_000;
  return { startMs: Math.floor(a / step) * step, endMs: Math.ceil(b / step) * step };
}

/** Native 10-minute slots in the aligned window; 0 when the window is invalid. */
export function windowSlots(from: string, to: string): number {
  const w = alignedWindowMs(from, to);
  return w === null ? 0 : (w.endMs - w.startMs) / (SLOT_MINUTES * 60_000);
}

/**
 * Decimation the server should apply: 1 for windows up to a week, then the
 * smallest stride that keeps the frame count at or below a week's slots.
 */
export function strideFor(from: string, to: string): number {
  const slots = windowSlots(from, to);
  return slots <= STRIDE_TARGET_SLOTS ? 1 : Math.ceil(slots / STRIDE_TARGET_SLOTS);
}

/** Frames the server will return for this window (one per stride-th slot). */
export function expectedFrameCount(from: string, to: string): number {
  const slots = windowSlots(from, to);
  return slots === 0 ? 0 : Math.ceil(slots / strideFor(from, to));
}

export function clampCursor(cursor: number, frameCount: number): number {
  if (frameCount <= 0) {
    return 0;
  }
  return Math.min(Math.max(0, Math.floor(cursor)), frameCount - 1);
}

function isPowerOfTwo(n: number): boolean {
  return Number.isInteger(n) && n >= 1 && (n & (n - 1)) === 0;
}

/** Every contract violation in the state, empty when it is safe to query. */
export function validateView(v: ViewState): string[] {
  const problems: string[] = [];
  const [south, west, north, east] = v.bbox;
  for (const [name, value, lo, hi] of [
    ["south", south, -90, 90],
    ["north", north, -90, 90],
    ["west", west, -180, 180],
    ["east", east, -180, 180],
  ] as const) {
    if (!Number.isFinite(value) || value < lo || value > hi) {
      problems.push(`${name} must be within [${lo}, ${hi}]`);
    }
  }
  if (Number.isFinite(south) && Number.isFinite(north) && !(south < north)) {
    problems.push("bbox must satisfy south < north");
  }
  if (Number.isFinite(west) && Number.isFinite(east) && !(west < east)) {
    problems.push("bbox must satisfy west < east");
  }
  for (const [name, value] of [["nx", v.nx], ["ny", v.ny]] as const) {
    if (!Number.isInteger(value) || value < 1 || value > MAX_GRID_CELLS) {
      problems.push(`${name} must be an integer in [1, ${MAX_GRID_CELLS}]`);
    }
  }
  if (parseUtcMs(v.from) === null) {
    problems.push("from must be a UTC timestamp like 2012-01-01T12:00:00Z");
  }
  if (parseUtcMs(v.to) === null) {
    problems.push("to must be a UTC timestamp like 2012-01-01T13:00:00Z");
  } else if (parseUtcMs(v.from) !== null && windowSlots(v.from, v.to) === 0) {
    problems.push("from must be before to");
  }
  const frames = expectedFrameCount(v.from, v.to);
  if (!Number.isInteger(v.cursor) || v.cursor < 0 || (frames > 0 && v.cursor >= frames)) {
    problems.push("cursor must index a frame inside the window");
  }
  if (!Number.isFinite(v.speedMs) || v.speedMs < MIN_SPEED_MS || v.speedMs > MAX_SPEED_MS) {
    problems.push(`speed must be within [${MIN_SPEED_MS}, ${MAX_SPEED_MS}] ms`);
  }
  if (!isPowerOfTwo(v.timelineZoom) || v.timelineZoom > MAX_TIMELINE_ZOOM) {
    problems.push(`timeline zoom must be a power of two in [1, ${MAX_TIMELINE_ZOOM}]`);
  }
  return problems;
}

// -- location.hash codec ----------------------------------------------------

export function viewToHash(v: ViewState): string {
  const params = new URLSearchParams();
  params.set("from", v.from);
  params.set("to", v.to);
  params.set("bbox", v.bbox.join(","));
  params.set("nx", String(v.nx));
  params.set("ny", String(v.ny));
  if (v.node !== null) {
    params.set("node", v.node);
  }
  params.set("cursor", String(v.cursor));
  params.set("speed", String(v.speedMs));
  params.set("zoom", String(v.timelineZoom));
  return `#${params.toString()}`;
}

function intOr(text: string | null, fallback: number): number {
  if (text === null || !/^-?\d+$/.test(text)) {
    return fallback;
  }
  return parseInt(text, 10);
}

/** Rebuild a view from a hash, falling back per field, then validating whole. */
export function viewFromHash(hash: string, fallback: ViewState): ViewState {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const view: ViewState = { ...fallback, bbox: [...fallback.bbox] };
  const from = params.get("from");
  const to = params.get("to");
  if (from !== null) view.from = from;
  if (to !== null) view.to = to;
  const bbox = params.get("bbox");
  if (bbox !== null) {
    const parts = bbox.split(",").map(Number);
    if (parts.length === 4 && parts.every(Number.isFinite)) {
      view.bbox = parts as [number, number, number, number];
    }
  }
  view.nx = intOr(params.get("nx"), fallback.nx);
  view.ny = intOr(params.get("ny"), fallback.ny);
  view.node = params.get("node");
  view.cursor = intOr(params.get("cursor"), fallback.cursor);
  view.speedMs = intOr(params.get("speed"), fallback.speedMs);
  view.timelineZoom = intOr(params.get("zoom"), fallback.timelineZoom);
  return validateView(view).length === 0 ? view : fallback;
}

// -- query strings ----------------------------------------------------------

export function fwiQuery(v: ViewState): string {
  const params = new URLSearchParams();
  params.set("from", v.from);
  params.set("to", v.to);
  params.set("bbox", v.bbox.join(","));
  params.set("nx", String(v.nx));
  params.set("ny", String(v.ny));
  const stride = strideFor(v.from, v.to);
  if (stride > 1) {
    params.set("stride", String(stride));
  }
  if (v.node !== null) {
    params.set("node", v.node);
  }
  return params.toString();
}

export function statsQuery(v: ViewState): string {
  const params = new URLSearchParams();
  params.set("from", v.from);
  params.set("to", v.to);
  return params.toString();
}

export function timelineQuery(v: ViewState, node: string): string {
  const params = new URLSearchParams();
  params.set("from", v.from);
  params.set("to", v.to);
  params.set("node", node);
  return params.toString();
}
