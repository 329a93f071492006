// Triage queue: which concepts deserve analyst eyes, biggest first.

import type { ConceptSummary } from "./types.js";

export interface TriageItem {
  concept: ConceptSummary;
  size: number; // latest known cluster size
}

function latestSize(sizes: Array<number | null>): number {
  for (let i = sizes.length - 1; i >= 0; i--) {
    const v = sizes[i];
    if (v !== null && v !== undefined) return v;
  }
  return 0;
}

/**
 * Unlabeled concepts first seen after `novelSince`, sorted by latest size
 * descending (ties by id so the order is stable between polls).
 */
export function buildTriageQueue(
  concepts: ConceptSummary[],
  series: Record<string, Array<number | null>>,
  novelSince?: number,
): TriageItem[] {
  const items = concepts
    .filter((c) => c.severity === "unlabeled")
    .filter((c) => novelSince === undefined || c.first_seen > novelSince)
    .map((c) => ({ concept: c, size: latestSize(series[c.id] ?? []) }));
  items.sort((a, b) => b.size - a.size || a.concept.id.localeCompare(b.concept.id));
  return items;
}
