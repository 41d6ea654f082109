/**
 * Fixed rendering style, overridable from a JSON file so figure output is
 * reproducible across runs by construction.
 */
import * as fs from "fs";
import { Color } from "./raster";

export interface Style {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
  background: Color;
  frame: Color;
  grid: Color;
  text: Color;
  series: Color[];
  phaseColors: Record<string, Color>;
  heatLow: Color;
  heatHigh: Color;
  barWidth: number;
}

export const DEFAULT_STYLE: Style = {
  width: 720,
  height: 480,
  margin: { left: 64, right: 16, top: 24, bottom: 40 },
  background: [255, 255, 255, 255],
  frame: [40, 40, 40, 255],
  grid: [225, 225, 225, 255],
  text: [40, 40, 40, 255],
  series: [
    [31, 119, 180, 255],   // blue
    [214, 39, 40, 255],    // red
    [44, 160, 44, 255],    // green
    [255, 127, 14, 255],   // orange
    [148, 103, 189, 255],  // purple
  ],
  phaseColors: {
    unconverged: [235, 235, 235, 255],
    failure: [255, 224, 224, 255],
    success: [218, 242, 218, 255],
  },
  heatLow: [68, 1, 84, 255],     // dark violet
  heatHigh: [253, 231, 37, 255], // bright yellow
  barWidth: 0.8,
};

export function loadStyle(path?: string): Style {
  if (!path) {
    return DEFAULT_STYLE;
  }
  const overrides = JSON.parse(fs.readFileSync(path, "utf8"));
  return { ...DEFAULT_STYLE, ...overrides,
           margin: { ...DEFAULT_STYLE.margin, ...(overrides.margin ?? {}) },
           phaseColors: { ...DEFAULT_STYLE.phaseColors,
                          ...(overrides.phaseColors ?? {}) } };
}

/** Two-point colormap with gamma-free linear mixing. */
export function heatColor(style: Style, v: number): Color {
  const t = Math.max(0, Math.min(1, v));
  const c: Color = [0, 0, 0, 255];
  for (let i = 0; i < 3; i++) {
    c[i] = Math.round(style.heatLow[i] * (1 - t) + style.heatHigh[i] * t);
  }
  return c;
}
