// Pure plotting math: scales, SVG path strings, band overlap detection.
// Time runs along x; one spatial axis at a time runs along y.

import { Band, Polyline } from "./types.js";

export interface Scales {
  x: (t: number) => number;
  y: (v: number) => number;
}

export function makeScales(
  horizon: number,
  lo: number,
  hi: number,
  width: number,
  height: number,
  margin = 30,
): Scales {
  const spanY = hi - lo || 1;
  return {
    x: (t) => margin + ((t - 1) / Math.max(horizon - 1, 1)) * (width - 2 * margin),
    y: (v) => height - margin - ((v - lo) / spanY) * (height - 2 * margin),
  };
}

export function valueRange(bands: Band[], pad = 0.1): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const b of bands) {
    for (let i = 0; i < b.times.length; i++) {
      lo = Math.min(lo, b.mean[i] - 2 * b.sd[i]);
      hi = Math.max(hi, b.mean[i] + 2 * b.sd[i]);
    }
  }
  if (!isFinite(lo)) return [0, 1];
  const span = hi - lo || 1;
  return [lo - pad * span, hi + pad * span];
}

export function polylinePath(line: Polyline, scales: Scales): string {
  return line.times
    .map((t, i) => `${i === 0 ? "M" : "L"}${scales.x(t).toFixed(1)},${scales.y(line.values[i]).toFixed(1)}`)
    .join(" ");
}

/** Closed path tracing mean + sd forward and mean - sd back. */
export function bandPath(band: Band, scales: Scales): string {
  const up = band.times.map(
    (t, i) => `${i === 0 ? "M" : "L"}${scales.x(t).toFixed(1)},${scales.y(band.mean[i] + band.sd[i]).toFixed(1)}`,
  );
  const down = [...band.times.keys()]
    .reverse()
    .map((i) => `L${scales.x(band.times[i]).toFixed(1)},${scales.y(band.mean[i] - band.sd[i]).toFixed(1)}`);
  return up.join(" ") + " " + down.join(" ") + " Z";
}

/**
 * Times at which the mean +- sd envelopes of two distinct objects overlap:
 * the ambiguous regions worth highlighting.
 */
export function ambiguousTimes(bands: Band[]): number[] {
  const out = new Set<number>();
  for (let a = 0; a < bands.length; a++) {
    for (let b = a + 1; b < bands.length; b++) {
      const byTime = new Map<number, [number, number]>();
      bands[a].times.forEach((t, i) => {
        byTime.set(t, [bands[a].mean[i] - bands[a].sd[i], bands[a].mean[i] + bands[a].sd[i]]);
      });
      bands[b].times.forEach((t, i) => {
        const other = byTime.get(t);
        if (!other) return;
        const lo = bands[b].mean[i] - bands[b].sd[i];
        const hi = bands[b].mean[i] + bands[b].sd[i];
        if (hi >= other[0] && other[1] >= lo) out.add(t);
      });
    }
  }
  return [...out].sort((x, y) => x - y);
}

/** Contiguous [start, end] intervals from a sorted time list. */
export function intervals(times: number[]): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (const t of times) {
    const last = out[out.length - 1];
    if (last && t === last[1] + 1) {
      last[1] = t;
    } else {
      out.push([t, t]);
    }
  }
  return out;
}
