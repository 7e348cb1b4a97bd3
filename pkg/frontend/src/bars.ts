/** Attribution bar layout: display normalization that never reorders. */

import type { CompressedAttr } from "./protocol.js";

export const BAR_ORDER = ["distance", "velocity", "obstacle", "heading"] as const;

export const BAR_LABELS: Record<(typeof BAR_ORDER)[number], string> = {
  distance: "Dist. to berth. pos.",
  velocity: "Velocity",
  obstacle: "Obstacle",
  heading: "Heading",
};

export interface BarLayout {
  key: (typeof BAR_ORDER)[number];
  label: string;
  value: number; // raw compressed importance (shown on hover)
  height: number; // display fraction in [0, 1], normalized by the max
}

export interface BarsView {
  bars: BarLayout[];
  showNoExplanationBadge: boolean;
}

/**
 * Bars scaled by the largest compressed importance. Raw values stay
 * available for hover; a degenerate frame shows the badge and empty bars.
 */
export function computeBars(
  compressed: CompressedAttr | null,
  degenerate: boolean,
): BarsView {
  if (compressed === null || degenerate) {
    return {
      bars: BAR_ORDER.map((key) => ({
        key,
        label: BAR_LABELS[key],
        value: 0,
        height: 0,
      })),
      showNoExplanationBadge: degenerate,
    };
  }
  const peak = Math.max(...BAR_ORDER.map((key) => compressed[key]), 0);
  return {
    bars: BAR_ORDER.map((key) => ({
      key,
      label: BAR_LABELS[key],
      value: compressed[key],
      height: peak > 0 ? compressed[key] / peak : 0,
    })),
    showNoExplanationBadge: false,
  };
}
