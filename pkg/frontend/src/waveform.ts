// Waveform display geometry: lead lane ordering, min-max decimation, span
// overlay bands, and span focusing. Pure functions; the canvas code in
// main.ts only draws what these compute.

import type { PreviewLane, SpanPayload } from './api.js';

export const CANONICAL_LEADS = [
  'I', 'II', 'III', 'aVR', 'aVL', 'aVF',
  'V1', 'V2', 'V3', 'V4', 'V5', 'V6',
] as const;

/** One pixel column of a rendered lead lane. */
export interface Column {
  t: number; // column center, seconds
  min: number;
  max: number;
}

export interface Band {
  start: number; // seconds, clamped to [0, duration]
  end: number;
  x0: number; // pixels
  x1: number;
  label: string;
}

export interface Viewport {
  start: number; // seconds
  end: number;
  cursor: number;
}

/** Sort preview lanes into canonical lead order; unknown leads keep their
 * given order after the known ones. */
export function orderLanes(lanes: PreviewLane[]): PreviewLane[] {
  const rank = (lead: string): number => {
    const i = (CANONICAL_LEADS as readonly string[]).indexOf(lead);
    return i === -1 ? CANONICAL_LEADS.length : i;
  };
  return [...lanes].sort((a, b) => rank(a.lead) - rank(b.lead));
}

/**
 * Min-max decimation into at most `columns` pixel columns. Each column keeps
 * the extremes of every sample falling in its time slice, so narrow QRS
 * peaks survive no matter how far the view is zoomed out.
 */
export function decimateMinMax(points: [number, number][], columns: number): Column[] {
  if (points.length === 0 || columns <= 0) return [];
  if (points.length <= columns) {
    return points.map(([t, v]) => ({ t, min: v, max: v }));
  }
  const first = points[0]!;
  const last = points[points.length - 1]!;
  const t0 = first[0];
  const width = (last[0] - t0) / columns || 1;
  const out: Column[] = [];
  let idx = 0;
  for (let c = 0; c < columns; c++) {
    const tEnd = c === columns - 1 ? Infinity : t0 + (c + 1) * width;
    let min = Infinity;
    let max = -Infinity;
    let seen = false;
    while (idx < points.length && points[idx]![0] < tEnd) {
      const v = points[idx]![1];
      if (v < min) min = v;
      if (v > max) max = v;
      seen = true;
      idx++;
    }
    if (seen) out.push({ t: t0 + (c + 0.5) * width, min, max });
  }
  return out;
}

/**
 * Overlay bands for a structured span payload. Intervals are clamped to
 * [0, duration]; intervals entirely outside the record are dropped. A null
 * payload or a not-found verdict draws nothing.
 */
export function spanBands(
  spans: SpanPayload | null | undefined,
  duration: number,
  widthPx: number,
): Band[] {
  if (!spans || spans.not_found || duration <= 0) return [];
  const bands: Band[] = [];
  for (const [s, e] of spans.intervals) {
    const start = Math.max(0, Math.min(s, duration));
    const end = Math.max(0, Math.min(e, duration));
    if (end <= start) continue;
    bands.push({
      start,
      end,
      x0: (start / duration) * widthPx,
      x1: (end / duration) * widthPx,
      label: `${start.toFixed(1)}s-${end.toFixed(1)}s`,
    });
  }
  return bands;
}

/** Zoom the viewport to one span with a margin and park the cursor on its
 * midpoint. */
export function focusSpan(interval: [number, number], duration: number): Viewport {
  const [s, e] = interval;
  const pad = Math.max(0.5, 0.25 * (e - s));
  return {
    start: Math.max(0, s - pad),
    end: Math.min(duration, e + pad),
    cursor: (s + e) / 2,
  };
}
