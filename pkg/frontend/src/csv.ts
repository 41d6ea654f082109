/**
 * Strict CSV reading against the fixed schemas the training harness
 * writes.  A header mismatch fails fast with column diagnostics, so a
 * figure can never be rendered from the wrong kind of file.
 */
import * as fs from "fs";

export interface Table {
  columns: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((l, i) => {
    const cells = l.split(",");
    if (cells.length !== columns.length) {
      throw new Error(`${path}: row ${i + 2} has ${cells.length} cells, ` +
        `expected ${columns.length}`);
    }
    return cells;
  });
  return { columns, rows };
}

export function requireColumns(t: Table, wanted: string[], path: string):
    Map<string, number> {
  const index = new Map<string, number>();
  t.columns.forEach((c, i) => index.set(c, i));
  const missing = wanted.filter((c) => !index.has(c));
  if (missing.length > 0) {
    throw new Error(
      `${path}: schema mismatch: missing columns [${missing.join(", ")}]; ` +
      `found [${t.columns.join(", ")}]`);
  }
  return index;
}

export function numericColumn(t: Table, idx: number): number[] {
  return t.rows.map((r) => Number(r[idx]));
}

export const TRAINING_COLUMNS = [
  "outer_step", "inner_count", "stop_reason", "loss_total", "loss_f",
  "loss_b", "rmae", "rrmse", "grad_inf_norm", "param_l2_norm", "phase",
  "wall_seconds",
];

export const SEGMENT_COLUMNS = ["alpha", "loss", "rmae"];
export const PLANE_COLUMNS = ["alpha", "beta", "loss", "rmae"];
export const SWEEP_COLUMNS = [
  "pde", "param_name", "param_value", "precision", "seed",
  "outer_steps_run", "final_loss", "final_rmae", "final_rrmse",
  "final_phase", "stalled", "status",
];
