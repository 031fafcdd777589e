import type { CrmView } from "./types.js";

export interface HeatCell {
  row: number;
  col: number;
  value: number;
  color: string;
}

/** Map a normalized CRM entry in [0, 1] to a cold-to-hot css color. */
export function heatColor(value: number): string {
  const v = Math.max(0, Math.min(1, value));
  const hue = Math.round(210 - 210 * v); // blue (close) -> red (distinct)
  const light = Math.round(92 - 42 * v);
  return `hsl(${hue}, 75%, ${light}%)`;
}

export function heatmapCells(crm: CrmView): HeatCell[] {
  if (crm.entries.length !== crm.n * crm.n) {
    throw new Error(`CRM entries length ${crm.entries.length} != ${crm.n}^2`);
  }
  const cells: HeatCell[] = [];
  for (let row = 0; row < crm.n; row++) {
    for (let col = 0; col < crm.n; col++) {
      const value = crm.entries[row * crm.n + col];
      cells.push({ row, col, value, color: heatColor(value) });
    }
  }
  return cells;
}
