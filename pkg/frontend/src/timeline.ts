// Stacked per-concept volume bands over the window range. A concept absent
// from a window leaves a gap in its band — absence is information, so nulls
// are never drawn as zeros. Noise sits in a reserved gray band at the base.

import { NOISE_COLOR, colorFor } from "./colors.js";
import type { TimelineResponse } from "./types.js";

export const NOISE_BAND = "__noise__";

export interface BandSegment {
  start: number; // index into the window range
  lower: number[];
  upper: number[];
}

export interface StackedBand {
  concept: string;
  segments: BandSegment[];
}

export interface Stack {
  windows: number[];
  bands: StackedBand[];
  maxTotal: number;
}

export function stackSeries(data: TimelineResponse): Stack {
  const n = data.windows.length;
  const order = Object.keys(data.series).sort();
  const bands: StackedBand[] = [];
  const running = new Array<number>(n).fill(0);

  const push = (concept: string, values: Array<number | null>) => {
    const segments: BandSegment[] = [];
    let current: BandSegment | null = null;
    for (let i = 0; i < n; i++) {
      const v = values[i];
      if (v === null || v === undefined) {
        current = null;
        continue;
      }
      if (current === null) {
        current = { start: i, lower: [], upper: [] };
        segments.push(current);
      }
      current.lower.push(running[i]);
      running[i] += v;
      current.upper.push(running[i]);
    }
    bands.push({ concept, segments });
  };

  push(NOISE_BAND, data.noise);
  for (const concept of order) {
    push(concept, data.series[concept]);
  }
  const maxTotal = running.length ? Math.max(...running, 1) : 1;
  return { windows: data.windows, bands, maxTotal };
}

/** Band under a (window position, stacked-volume) point, for hover lookup. */
export function bandAt(stack: Stack, position: number, volume: number): string | null {
  for (const band of stack.bands) {
    for (const seg of band.segments) {
      const offset = position - seg.start;
      if (offset < 0 || offset >= seg.lower.length) continue;
      if (volume >= seg.lower[offset] && volume < seg.upper[offset]) {
        return band.concept;
      }
    }
  }
  return null;
}

export function sizeAt(stack: Stack, concept: string, position: number): number | null {
  const band = stack.bands.find((b) => b.concept === concept);
  if (!band) return null;
  for (const seg of band.segments) {
    const offset = position - seg.start;
    if (offset >= 0 && offset < seg.lower.length) {
      return seg.upper[offset] - seg.lower[offset];
    }
  }
  return null;
}

export interface TimelineGeometry {
  width: number;
  height: number;
  padLeft: number;
  padBottom: number;
}

export const DEFAULT_GEOMETRY: TimelineGeometry = {
  width: 900,
  height: 260,
  padLeft: 48,
  padBottom: 22,
};

function xAt(i: number, n: number, geo: TimelineGeometry): number {
  const plot = geo.width - geo.padLeft - 8;
  if (n <= 1) return geo.padLeft + plot;
  return geo.padLeft + (i / (n - 1)) * plot;
}

function yAt(v: number, maxTotal: number, geo: TimelineGeometry): number {
  const plot = geo.height - geo.padBottom - 8;
  return geo.height - geo.padBottom - (v / maxTotal) * plot;
}

function polygonPoints(seg: BandSegment, n: number, maxTotal: number, geo: TimelineGeometry): string {
  const pts: string[] = [];
  const m = seg.lower.length;
  for (let k = 0; k < m; k++) {
    const x = m === 1 && n > 1 ? xAt(seg.start, n, geo) : xAt(seg.start + k, n, geo);
    pts.push(`${x.toFixed(1)},${yAt(seg.upper[k], maxTotal, geo).toFixed(1)}`);
  }
  if (m === 1) {
    // single-window segment: give it visible width (half a step each side)
    const x0 = xAt(seg.start, n, geo);
    const step = n > 1 ? (xAt(1, n, geo) - xAt(0, n, geo)) / 2 : 20;
    return (
      `${(x0 - step).toFixed(1)},${yAt(seg.upper[0], maxTotal, geo).toFixed(1)} ` +
      `${(x0 + step).toFixed(1)},${yAt(seg.upper[0], maxTotal, geo).toFixed(1)} ` +
      `${(x0 + step).toFixed(1)},${yAt(seg.lower[0], maxTotal, geo).toFixed(1)} ` +
      `${(x0 - step).toFixed(1)},${yAt(seg.lower[0], maxTotal, geo).toFixed(1)}`
    );
  }
  for (let k = m - 1; k >= 0; k--) {
    const x = xAt(seg.start + k, n, geo);
    pts.push(`${x.toFixed(1)},${yAt(seg.lower[k], maxTotal, geo).toFixed(1)}`);
  }
  return pts.join(" ");
}

export interface ConceptMeta {
  category?: string;
  severity?: string;
}

export function renderTimelineSvg(
  stack: Stack,
  meta: Record<string, ConceptMeta> = {},
  geo: TimelineGeometry = DEFAULT_GEOMETRY,
): string {
  if (stack.windows.length === 0) {
    return `<div class="empty-state">No windows in range yet.</div>`;
  }
  const n = stack.windows.length;
  const parts: string[] = [];
  parts.push(
    `<svg class="timeline" viewBox="0 0 ${geo.width} ${geo.height}" ` +
      `data-windows="${stack.windows[0]}:${stack.windows[n - 1]}" ` +
      `data-max="${stack.maxTotal}" preserveAspectRatio="none" role="img">`,
  );
  for (const band of stack.bands) {
    const isNoise = band.concept === NOISE_BAND;
    const color = isNoise ? NOISE_COLOR : colorFor(band.concept);
    const category = isNoise ? "NoiseOutliers" : (meta[band.concept]?.category ?? "");
    for (const seg of band.segments) {
      const points = polygonPoints(seg, n, stack.maxTotal, geo);
      const label = isNoise ? "noise" : band.concept;
      parts.push(
        `<polygon class="band${isNoise ? " noise" : ""}" points="${points}" ` +
          `fill="${color}" data-concept="${band.concept}" data-category="${category}">` +
          `<title>${label}${category ? ` · ${category}` : ""}</title></polygon>`,
      );
    }
  }
  // x-axis window labels, thinned to at most 8
  const every = Math.max(1, Math.ceil(n / 8));
  for (let i = 0; i < n; i += every) {
    parts.push(
      `<text class="axis" x="${xAt(i, n, geo).toFixed(1)}" y="${geo.height - 6}">` +
        `w${stack.windows[i]}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
