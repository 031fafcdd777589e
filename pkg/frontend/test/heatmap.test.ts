import { describe, expect, it } from "vitest";

import { heatColor, heatmapCells } from "../src/heatmap.js";

describe("heatmapCells", () => {
  it("lays out row-major cells with colors", () => {
    const cells = heatmapCells({ n: 2, entries: [0, 0.5, 0.5, 0] });
    expect(cells).toHaveLength(4);
    expect(cells[1]).toMatchObject({ row: 0, col: 1, value: 0.5 });
    expect(cells[2]).toMatchObject({ row: 1, col: 0, value: 0.5 });
    expect(cells[1].color).toBe(cells[2].color);
  });

  it("rejects mismatched entry counts", () => {
    expect(() => heatmapCells({ n: 3, entries: [0, 1] })).toThrow(/length/);
  });
});

describe("heatColor", () => {
  it("is deterministic and clamps out-of-range values", () => {
    expect(heatColor(0)).toBe(heatColor(-1));
    expect(heatColor(1)).toBe(heatColor(2));
    expect(heatColor(0.25)).toBe(heatColor(0.25));
  });

  it("moves from cold to hot hues as distance grows", () => {
    const hue = (css: string) => Number(css.match(/hsl\((\d+)/)![1]);
    expect(hue(heatColor(0))).toBeGreaterThan(hue(heatColor(0.5)));
    expect(hue(heatColor(0.5))).toBeGreaterThan(hue(heatColor(1)));
  });
});
