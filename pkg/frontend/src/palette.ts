/** Fixed label palette (stable across sessions and screenshots) and the
 * heat scale for the uncertainty overlay. */

export const LABEL_COLORS: string[] = [
  "#8c8c8c", // 0 background: neutral gray
  "#e6194b",
  "#4363d8",
  "#ffe119",
  "#3cb44b",
  "#911eb4",
  "#f58231",
  "#42d4f4",
  "#f032e6",
];

export function labelColor(label: number): string {
  return LABEL_COLORS[label % LABEL_COLORS.length];
}

/** Normalized heat: 0 -> deep blue, 1 -> bright yellow. */
export function heatColor(value: number, uMin: number, uMax: number): string {
  const span = uMax - uMin;
  const t = span > 0 ? Math.min(1, Math.max(0, (value - uMin) / span)) : 0;
  const r = Math.round(255 * Math.min(1, 2 * t));
  const g = Math.round(255 * Math.max(0, 2 * t - 1) * 0.9 + 40 * (1 - t));
  const b = Math.round(200 * (1 - t));
  return `rgb(${r},${g},${b})`;
}

export function rgbColor(r: number, g: number, b: number): string {
  const c = (v: number) => Math.round(255 * Math.min(1, Math.max(0, v)));
  return `rgb(${c(r)},${c(g)},${c(b)})`;
}
