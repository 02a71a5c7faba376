// DOM/SVG layer. All math lives in geometry.ts; this file only writes nodes.

import {
  Scales,
  ambiguousTimes,
  bandPath,
  intervals,
  makeScales,
  polylinePath,
  valueRange,
} from "./geometry.js";
import { ConsoleState } from "./state.js";
import { PosteriorPayload, QueryPayload } from "./types.js";

const COLORS = ["#2a9d8f", "#4361ee", "#e76f51", "#9d4edd", "#ff9f1c"];
const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

export function renderPosterior(
  svg: SVGSVGElement,
  payload: PosteriorPayload,
  query: QueryPayload | null,
  horizon: number,
  axis = 0,
): void {
  svg.replaceChildren();
  const width = svg.clientWidth || 900;
  const height = svg.clientHeight || 420;
  const [lo, hi] = valueRange(payload.bands);
  const scales: Scales = makeScales(horizon, lo, hi, width, height);

  for (const [start, end] of intervals(ambiguousTimes(payload.bands))) {
    svg.appendChild(el("rect", {
      x: String(scales.x(start) - 4),
      width: String(Math.max(scales.x(end) - scales.x(start) + 8, 8)),
      y: "0",
      height: String(height),
      fill: "#ffe8a3",
      opacity: "0.45",
    }));
  }
  for (const line of payload.polylines) {
    svg.appendChild(el("path", {
      d: polylinePath(line, scales),
      fill: "none",
      stroke: COLORS[(line.object - 1) % COLORS.length],
      opacity: "0.12",
      "stroke-width": "1",
    }));
  }
  for (const band of payload.bands) {
    const color = COLORS[(band.object - 1) % COLORS.length];
    svg.appendChild(el("path", {
      d: bandPath(band, scales), fill: color, opacity: "0.25", stroke: "none",
    }));
    svg.appendChild(el("path", {
      d: polylinePath({ object: band.object, times: band.times, values: band.mean }, scales),
      fill: "none", stroke: color, "stroke-width": "2",
    }));
  }
  if (query) {
    for (const ctx of query.context.flat()) {
      svg.appendChild(el("circle", {
        cx: String(scales.x(ctx.t)), cy: String(scales.y(ctx.coords[axis])),
        r: "3", fill: "#666", opacity: "0.5",
      }));
    }
    for (const obs of query.observations) {
      svg.appendChild(el("circle", {
        cx: String(scales.x(obs.t)), cy: String(scales.y(obs.coords[axis])),
        r: "8", fill: "none", stroke: "#d00000", "stroke-width": "3",
      }));
    }
  }
}

export function renderTrace(node: HTMLElement, trace: number[]): void {
  node.textContent = trace.length
    ? "uncertainty: " + trace.map((v) => v.toFixed(4)).join(" → ")
    : "uncertainty: (waiting for samples)";
}

export function renderControls(
  buttons: { same: HTMLButtonElement; different: HTMLButtonElement; skip: HTMLButtonElement },
  statusNode: HTMLElement,
  state: ConsoleState,
): void {
  const enabled = state.phase === "ready" && state.query !== null;
  buttons.same.disabled = !enabled;
  buttons.different.disabled = !enabled;
  buttons.skip.disabled = !enabled;
  statusNode.textContent = {
    loading: "connecting…",
    "waiting-samples": "sampling…",
    ready: state.query
      ? `round ${state.query.round}: do the two circled detections belong to the same object?`
      : "ready",
    submitting: "resampling with your answer…",
    error: `error: ${state.error}`,
  }[state.phase];
}
