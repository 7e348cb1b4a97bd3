import { describe, expect, it } from "vitest";

import { BAR_ORDER, computeBars } from "../src/bars.js";

describe("attribution bars", () => {
  it("preserves the value ordering after display normalization", () => {
    const view = computeBars(
      { distance: 2.0, velocity: 1.0, obstacle: 1.5, heading: 0.2 },
      false,
    );
    const byKey = Object.fromEntries(view.bars.map((b) => [b.key, b]));
    expect(byKey.distance.height).toBeGreaterThan(byKey.obstacle.height);
    expect(byKey.obstacle.height).toBeGreaterThan(byKey.velocity.height);
    expect(byKey.velocity.height).toBeGreaterThan(byKey.heading.height);
    // ranks identical before and after normalization
    const rawRank = view.bars.map((b) => b.value).map((v, _, arr) =>
      arr.filter((o) => o > v).length,
    );
    const heightRank = view.bars.map((b) => b.height).map((v, _, arr) =>
      arr.filter((o) => o > v).length,
    );
    expect(heightRank).toEqual(rawRank);
  });

  it("scales the tallest bar to full height", () => {
    const view = computeBars(
      { distance: 2.0, velocity: 1.0, obstacle: 0.5, heading: 0.0 },
      false,
    );
    expect(view.bars[0].height).toBe(1);
    expect(view.bars[1].height).toBeCloseTo(0.5);
    expect(view.bars[3].height).toBe(0);
  });

  it("matches the layout snapshot for a representative frame", () => {
    const view = computeBars(
      { distance: 2.0, velocity: 1.0, obstacle: 1.5, heading: 0.25 },
      false,
    );
    expect(view).toMatchSnapshot();
  });

  it("shows the badge and empty bars for a degenerate frame", () => {
    const view = computeBars(
      { distance: 1.0, velocity: 1.0, obstacle: 1.0, heading: 1.0 },
      true,
    );
    expect(view.showNoExplanationBadge).toBe(true);
    for (const bar of view.bars) {
      expect(bar.height).toBe(0);
      expect(bar.value).toBe(0);
    }
    expect(view).toMatchSnapshot();
  });

  it("handles a missing attribution block without a badge", () => {
    const view = computeBars(null, false);
    expect(view.showNoExplanationBadge).toBe(false);
    for (const bar of view.bars) expect(bar.height).toBe(0);
  });

  it("keeps the operator group order fixed", () => {
    expect(BAR_ORDER).toEqual(["distance", "velocity", "obstacle", "heading"]);
    const view = computeBars(
      { distance: 0.1, velocity: 5.0, obstacle: 0.1, heading: 0.1 },
      false,
    );
    expect(view.bars.map((b) => b.key)).toEqual([...BAR_ORDER]);
  });
});
