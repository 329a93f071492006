// Stable concept -> color assignment: hashing the id keeps a concept's band
// color fixed across refreshes and window ranges.

const PALETTE = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#86bcb6",
  "#d37295", "#8cd17d", "#a0cbe8", "#ffbe7d", "#499894",
  "#b6992d", "#d4a6c8", "#fabfd2", "#79706e", "#bab0ac",
];

export const NOISE_COLOR = "#d0d0d0";

export function hashString(text: string): number {
  let h = 2166136261;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}

export function colorFor(conceptId: string): string {
  return PALETTE[hashString(conceptId) % PALETTE.length];
}
