/**
 * DOM wiring: binds the pure plan builders to the page and the API.
 *
 * All rendering flows through render(), which reads only the current
 * ViewState and the last good responses, so the screen is a function of
 * exactly that pair; the state itself round-trips through location.hash.
 * Failed requests raise the error banner and leave the previous view intact.
 */

import { ApiError, getJson, RequestGate } from "./api.js";
import { legendEntries } from "./colors.js";
import { shortUtc } from "./format.js";
import { animationSteps, framePlan, nodeMarkers } from "./overlay.js";
import { arcPath, statsPies } from "./pies.js";
import { Player } from "./player.js";
import {
  clampCursor,
  DEFAULT_VIEW,
  fwiQuery,
  parseUtcMs,
  statsQuery,
  timelineQuery,
  validateView,
  viewFromHash,
  viewToHash,
  type ViewState,
} from "./state.js";
import { timelinePlan, zoomIn, zoomOut } from "./timeline.js";
import type {
  FwiResponse,
  NodeInfo,
  NodesResponse,
  StatsResponse,
  TimelineRow,
} from "./types.js";

const MAP_W = 480;
const MAP_H = 360;
const TIMELINE_W = 640;
const TIMELINE_H = 90;
const PIE_R = 52;

interface ViewData {
  fwi: FwiResponse | null;
  stats: StatsResponse | null;
  timeline: TimelineRow[] | null;
  nodes: NodeInfo[];
  error: string | null;
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(name: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function main(): void {
  const state: ViewState = viewFromHash(location.hash, DEFAULT_VIEW);
  const data: ViewData = { fwi: null, stats: null, timeline: null, nodes: [], error: null };
  const gate = new RequestGate();
  const player = new Player();
  let timer: number | null = null;

  const form = byId<HTMLFormElement>("controls");
  const banner = byId<HTMLDivElement>("banner");
  const mapSvg = byId<HTMLElement>("map") as unknown as SVGSVGElement;
  const frameCaption = byId<HTMLDivElement>("frame-caption");
  const gapsLine = byId<HTMLDivElement>("gaps");
  const playBtn = byId<HTMLButtonElement>("play");
  const scrub = byId<HTMLInputElement>("scrub");
  const speedSel = byId<HTMLSelectElement>("speed");
  const legendBox = byId<HTMLDivElement>("legend");
  const piesBox = byId<HTMLDivElement>("pies");
  const timelineSvg = byId<HTMLElement>("timeline") as unknown as SVGSVGElement;
  const timelineCaption = byId<HTMLDivElement>("timeline-caption");
  const nodeSel = byId<HTMLSelectElement>("node");

  const field = (name: string): HTMLInputElement =>
    form.elements.namedItem(name) as HTMLInputElement;

  function fillForm(): void {
    field("from").value = state.from;
    field("to").value = state.to;
    const [s, w, n, e] = state.bbox;
    field("south").value = String(s);
    field("west").value = String(w);
    field("north").value = String(n);
    field("east").value = String(e);
    field("nx").value = String(state.nx);
    field("ny").value = String(state.ny);
    nodeSel.value = state.node ?? "";
    speedSel.value = String(state.speedMs);
  }

  function readForm(): void {
    state.from = field("from").value.trim();
    state.to = field("to").value.trim();
    state.bbox = [
      Number(field("south").value),
      Number(field("west").value),
      Number(field("north").value),
      Number(field("east").value),
    ];
    state.nx = Number(field("nx").value);
    state.ny = Number(field("ny").value);
    state.node = nodeSel.value === "" ? null : nodeSel.value;
    state.cursor = 0;
  }

  function buildLegend(): void {
    legendBox.textContent = "";
    for (const entry of legendEntries()) {
      const item = document.createElement("div");
      item.className = "legend-item";
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.style.backgroundColor = entry.color;
      const text = document.createElement("span");
      text.textContent = entry.label;
      item.append(chip, text);
      legendBox.append(item);
    }
  }

  function renderMap(): void {
    mapSvg.textContent = "";
    const defs = svgEl("defs");
    const pattern = svgEl("pattern", {
      id: "hatch",
      width: "8",
      height: "8",
      patternUnits: "userSpaceOnUse",
    });
    pattern.append(
      svgEl("rect", { width: "8", height: "8", fill: "#f2f0ea" }),
      svgEl("path", { d: "M0 8 L8 0", stroke: "#b0aa9c", "stroke-width": "1" }),
    );
    defs.append(pattern);
    mapSvg.append(defs);

    const frames = data.fwi?.frames ?? [];
    const frame = frames[state.cursor];
    if (frame === undefined) {
      mapSvg.append(
        svgEl("rect", {
          width: String(MAP_W),
          height: String(MAP_H),
          fill: "#f2f0ea",
          stroke: "#ccc",
        }),
      );
      const hint = svgEl("text", {
        x: String(MAP_W / 2),
        y: String(MAP_H / 2),
        "text-anchor": "middle",
        class: "placeholder",
      });
      hint.textContent = "no frames loaded";
      mapSvg.append(hint);
      frameCaption.textContent = "";
      gapsLine.textContent = "";
      return;
    }

    const plan = framePlan(frame, MAP_W, MAP_H);
    if (plan.hatched) {
      mapSvg.append(
        svgEl("rect", {
          width: String(MAP_W),
          height: String(MAP_H),
          fill: "url(#hatch)",
          stroke: "#ccc",
        }),
      );
    } else {
      for (const cell of plan.cells) {
        const rect = svgEl("rect", {
          x: cell.x.toFixed(2),
          y: cell.y.toFixed(2),
          width: cell.w.toFixed(2),
          height: cell.h.toFixed(2),
          fill: cell.fill,
        });
        const tip = svgEl("title");
        tip.textContent = `${cell.label} (${cell.value.toFixed(4)})`;
        rect.append(tip);
        mapSvg.append(rect);
      }
    }
    mapSvg.append(
      svgEl("rect", {
        width: String(MAP_W),
        height: String(MAP_H),
        fill: "none",
        stroke: "#555",
      }),
    );
    const bbox = data.fwi?.bbox ?? state.bbox;
    for (const marker of nodeMarkers(data.nodes, bbox, MAP_W, MAP_H)) {
      const dot = svgEl("circle", {
        cx: marker.x.toFixed(2),
        cy: marker.y.toFixed(2),
        r: "4",
        class: marker.id === state.node ? "node selected" : "node",
      });
      const tip = svgEl("title");
      tip.textContent = marker.id;
      dot.append(tip);
      mapSvg.append(dot);
    }

    const steps = data.fwi === null ? [] : animationSteps(data.fwi);
    frameCaption.textContent =
      `frame ${state.cursor + 1}/${steps.length}: ${shortUtc(plan.time)}` +
      (plan.hatched ? " (no data)" : "");
    const gaps = data.fwi?.gaps ?? [];
    gapsLine.textContent =
      gaps.length === 0
        ? ""
        : "gaps: " + gaps.map((g) => `${shortUtc(g.from)} to ${shortUtc(g.to)}`).join(", ");
  }

  function renderPies(): void {
    piesBox.textContent = "";
    if (data.stats === null) {
      return;
    }
    for (const plan of statsPies(data.stats)) {
      const box = document.createElement("div");
      box.className = "pie";
      const title = document.createElement("h3");
      title.textContent = `${plan.title} (${plan.total} events)`;
      box.append(title);
      const size = 2 * PIE_R + 8;
      const svg = svgEl("svg", {
        width: String(size),
        height: String(size),
        viewBox: `0 0 ${size} ${size}`,
      }) as SVGSVGElement;
      if (plan.empty) {
        const hint = svgEl("text", {
          x: String(size / 2),
          y: String(size / 2),
          "text-anchor": "middle",
          class: "placeholder",
        });
        hint.textContent = "no data";
        svg.append(hint);
      } else {
        for (const slice of plan.slices) {
          const path = svgEl("path", {
            d: arcPath(size / 2, size / 2, PIE_R, slice.startAngle, slice.endAngle),
            fill: slice.color,
          });
          const tip = svgEl("title");
          tip.textContent = `${slice.legend} (${slice.count})`;
          path.append(tip);
          svg.append(path);
        }
      }
      box.append(svg);
      const legend = document.createElement("ul");
      legend.className = "pie-legend";
      for (const slice of plan.slices) {
        const li = document.createElement("li");
        const chip = document.createElement("span");
        chip.className = "chip";
        chip.style.backgroundColor = slice.color;
        const text = document.createElement("span");
        text.textContent = slice.legend;
        li.append(chip, text);
        legend.append(li);
      }
      box.append(legend);
      piesBox.append(box);
    }
  }

  function renderTimeline(): void {
    timelineSvg.textContent = "";
    if (state.node === null || data.timeline === null) {
      timelineCaption.textContent =
        state.node === null ? "select a node to see its timeline" : "";
      return;
    }
    const frames = data.fwi?.frames ?? [];
    const current = frames[state.cursor];
    const centerMs = current === undefined ? null : parseUtcMs(current.time);
    const plan = timelinePlan(
      data.timeline,
      state.from,
      state.to,
      state.timelineZoom,
      centerMs,
      TIMELINE_W,
    );
    const axisY = TIMELINE_H - 20;
    timelineSvg.append(
      svgEl("line", {
        x1: "0",
        y1: String(axisY),
        x2: String(TIMELINE_W),
        y2: String(axisY),
        stroke: "#555",
      }),
    );
    for (const tick of plan.ticks) {
      timelineSvg.append(
        svgEl("line", {
          x1: tick.x.toFixed(2),
          y1: String(axisY),
          x2: tick.x.toFixed(2),
          y2: String(axisY + 5),
          stroke: "#555",
        }),
      );
      const text = svgEl("text", {
        x: tick.x.toFixed(2),
        y: String(axisY + 16),
        "text-anchor": "middle",
        class: "tick",
      });
      text.textContent = tick.text;
      timelineSvg.append(text);
    }
    for (const mark of plan.marks) {
      const h = 4 + (mark.ordinal / 15) * (axisY - 12);
      const bar = svgEl("rect", {
        x: (mark.x - 1.5).toFixed(2),
        y: (axisY - h).toFixed(2),
        width: "3",
        height: h.toFixed(2),
        fill: mark.color,
      });
      const tip = svgEl("title");
      tip.textContent = `${shortUtc(mark.time)}: ${mark.label} (${mark.ordinal})`;
      bar.append(tip);
      timelineSvg.append(bar);
    }
    if (centerMs !== null && centerMs >= plan.visibleFromMs && centerMs <= plan.visibleToMs) {
      const x =
        ((centerMs - plan.visibleFromMs) / (plan.visibleToMs - plan.visibleFromMs)) * TIMELINE_W;
      timelineSvg.append(
        svgEl("line", {
          x1: x.toFixed(2),
          y1: "0",
          x2: x.toFixed(2),
          y2: String(axisY),
          stroke: "#333",
          "stroke-dasharray": "3,2",
        }),
      );
    }
    timelineCaption.textContent =
      `${state.node}: ${plan.marks.length} events in view, zoom x${plan.zoom}`;
  }

  function render(): void {
    history.replaceState(null, "", viewToHash(state));
    banner.textContent = data.error ?? "";
    banner.hidden = data.error === null;

    const frames = data.fwi?.frames.length ?? 0;
    scrub.max = String(Math.max(0, frames - 1));
    scrub.value = String(state.cursor);
    scrub.disabled = frames === 0;
    playBtn.disabled = frames === 0;
    playBtn.textContent = player.playing ? "pause" : "play";

    renderMap();
    renderPies();
    renderTimeline();
  }

  function schedule(): void {
    if (timer !== null) {
      window.clearInterval(timer);
      timer = null;
    }
    if (player.playing) {
      timer = window.setInterval(() => {
        state.cursor = player.tick();
        render();
      }, state.speedMs);
    }
  }

  async function refresh(): Promise<void> {
    const problems = validateView(state);
    if (problems.length > 0) {
      data.error = problems.join("; ");
      render();
      return;
    }
    try {
      const result = await gate.run(async () => {
        const fwi = getJson<FwiResponse>(`/fwi?${fwiQuery(state)}`, fetch);
        const stats = getJson<StatsResponse>(`/fwi/stats?${statsQuery(state)}`, fetch);
        const timeline =
          state.node === null
            ? Promise.resolve(null)
            : getJson<TimelineRow[]>(
                `/fwi/timeline?${timelineQuery(state, state.node)}`,
                fetch,
              );
        const [f, s, t] = await Promise.all([fwi, stats, timeline]);
        return { f, s, t };
      });
      if (result === null) {
        return; // a newer request superseded this one
      }
      data.fwi = result.f;
      data.stats = result.s;
      data.timeline = result.t;
      data.error = null;
      player.setFrameCount(result.f.frames.length);
      state.cursor = clampCursor(state.cursor, result.f.frames.length);
      player.scrubTo(state.cursor);
    } catch (exc) {
      data.error =
        exc instanceof ApiError
          ? `${exc.code}: ${exc.message}` + (exc.field !== undefined ? ` (${exc.field})` : "")
          : String(exc);
    }
    render();
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    readForm();
    player.pause();
    schedule();
    void refresh();
  });

  playBtn.addEventListener("click", () => {
    player.toggle();
    schedule();
    render();
  });

  scrub.addEventListener("input", () => {
    state.cursor = player.scrubTo(Number(scrub.value));
    render();
  });

  speedSel.addEventListener("change", () => {
    state.speedMs = Number(speedSel.value);
    schedule();
    render();
  });

  byId<HTMLButtonElement>("zoom-in").addEventListener("click", () => {
    state.timelineZoom = zoomIn(state.timelineZoom);
    render();
  });

  byId<HTMLButtonElement>("zoom-out").addEventListener("click", () => {
    state.timelineZoom = zoomOut(state.timelineZoom);
    render();
  });

  window.addEventListener("hashchange", () => {
    const next = viewFromHash(location.hash, state);
    Object.assign(state, next);
    fillForm();
    void refresh();
  });

  buildLegend();
  fillForm();
  render();

  void (async () => {
    try {
      const payload = await getJson<NodesResponse>("/nodes", fetch);
      data.nodes = payload.nodes;
      nodeSel.textContent = "";
      const blank = document.createElement("option");
      blank.value = "";
      blank.textContent = "all nodes";
      nodeSel.append(blank);
      for (const node of payload.nodes) {
        const opt = document.createElement("option");
        opt.value = node.id;
        opt.textContent = node.id;
        nodeSel.append(opt);
      }
      nodeSel.value = state.node ?? "";
    } catch (exc) {
      data.error = exc instanceof ApiError ? `${exc.code}: ${exc.message}` : String(exc);
    }
    await refresh();
  })();
}

main();
