/**
 * The five figure kinds: training curves with phase shading, optimizer
 * diagnostics, landscape heatmaps, segment interpolation plots and
 * precision-sweep bars.  Every renderer is a pure function from parsed
 * tables to a Raster; the CLI wraps them with file IO.
 */
import { numericColumn, PLANE_COLUMNS, readCsv, requireColumns,
         SEGMENT_COLUMNS, SWEEP_COLUMNS, Table, TRAINING_COLUMNS } from "./csv";
import { Color, FONT_H, FONT_W, measureText, Raster } from "./raster";
import { heatColor, Style } from "./style";

// ---------------------------------------------------------------------------
// scales and panels

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "nan";
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.001 && a < 10000) {
    return String(Number(v.toPrecision(3)));
  }
  return v.toExponential(1).replace("e+", "e");
}

interface Scale {
  (v: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, p0: number, p1: number): Scale {
  if (hi === lo) {
    hi = lo + 1;
  }
  const f = ((v: number) => p0 + ((v - lo) / (hi - lo)) * (p1 - p0)) as Scale;
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / 4)));
  const mult = span / 4 / step >= 5 ? 5 : span / 4 / step >= 2 ? 2 : 1;
  const tick = step * mult;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / tick) * tick; t <= hi + 1e-12 * span;
       t += tick) {
    ticks.push(Math.abs(t) < 1e-12 * span ? 0 : t);
  }
  f.ticks = ticks;
  return f;
}

function logScale(lo: number, hi: number, p0: number, p1: number): Scale {
  const safeLo = Math.max(lo, 1e-300);
  const safeHi = Math.max(hi, safeLo * 10);
  const la = Math.log10(safeLo);
  const lb = Math.log10(safeHi);
  const f = ((v: number) =>
    p0 + ((Math.log10(Math.max(v, 1e-300)) - la) / (lb - la)) * (p1 - p0)
  ) as Scale;
  const ticks: number[] = [];
  const from = Math.ceil(la);
  const to = Math.floor(lb);
  const stride = Math.max(1, Math.ceil((to - from) / 6));
  for (let d = from; d <= to; d += stride) {
    ticks.push(Math.pow(10, d));
  }
  f.ticks = ticks;
  return f;
}

interface Panel {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  xs: Scale;
  ys: Scale;
}

function makePanel(r: Raster, style: Style, rect: [number, number, number,
                   number], xlo: number, xhi: number, ylo: number,
                   yhi: number, logY: boolean, xlabel: string,
                   ylabel: string): Panel {
  const [x0, y0, x1, y1] = rect;
  const xs = linearScale(xlo, xhi, x0, x1);
  const ys = logY ? logScale(ylo, yhi, y1, y0) : linearScale(ylo, yhi, y1, y0);
  for (const t of xs.ticks) {
    const px = Math.round(xs(t));
    r.line(px, y0, px, y1, style.grid);
    const label = fmt(t);
    r.text(px - measureText(label) / 2, y1 + 6, label, style.text);
  }
  for (const t of ys.ticks) {
    const py = Math.round(ys(t));
    r.line(x0, py, x1, py, style.grid);
    const label = fmt(t);
    r.text(x0 - measureText(label) - 4, py - FONT_H / 2, label, style.text);
  }
  r.line(x0, y0, x0, y1, style.frame);
  r.line(x0, y1, x1, y1, style.frame);
  r.line(x1, y0, x1, y1, style.frame);
  r.line(x0, y0, x1, y0, style.frame);
  if (xlabel) {
    r.text((x0 + x1) / 2 - measureText(xlabel) / 2, y1 + 6 + FONT_H,
           xlabel, style.text);
  }
  if (ylabel) {
    r.textV(4, (y0 + y1) / 2 + measureText(ylabel) / 2, ylabel, style.text);
  }
  return { x0, y0, x1, y1, xs, ys };
}

function polyline(r: Raster, p: Panel, xs: number[], ys: number[],
                  c: Color): void {
  for (let i = 1; i < xs.length; i++) {
    if (!Number.isFinite(ys[i - 1]) || !Number.isFinite(ys[i])) continue;
    r.line(p.xs(xs[i - 1]), p.ys(ys[i - 1]), p.xs(xs[i]), p.ys(ys[i]), c);
  }
  if (xs.length === 1) {
    r.marker(p.xs(xs[0]), p.ys(ys[0]), c);
  }
}

// ---------------------------------------------------------------------------
// phase segmentation (shared with the curves test)

export interface PhaseSegment {
  phase: string;
  startStep: number;
  endStep: number;
}

export function computePhaseSegments(steps: number[],
                                     phases: string[]): PhaseSegment[] {
  const out: PhaseSegment[] = [];
  for (let i = 0; i < phases.length; i++) {
    const last = out[out.length - 1];
    if (last && last.phase === phases[i]) {
      last.endStep = steps[i];
    } else {
      out.push({ phase: phases[i], startStep: steps[i], endStep: steps[i] });
    }
  }
  return out;
}

function shadePhases(r: Raster, p: Panel, segments: PhaseSegment[],
                     style: Style): void {
  for (const seg of segments) {
    const c = style.phaseColors[seg.phase];
    if (!c) continue;
    const a = p.xs(seg.startStep - 0.5);
    const b = p.xs(seg.endStep + 0.5);
    r.fillRect(Math.max(p.x0 + 1, a), p.y0 + 1,
               Math.min(b, p.x1) - Math.max(p.x0 + 1, a), p.y1 - p.y0 - 1, c);
  }
}

function posRange(vals: number[]): [number, number] {
  const pos = vals.filter((v) => Number.isFinite(v) && v > 0);
  if (pos.length === 0) return [1e-8, 1];
  return [Math.min(...pos), Math.max(...pos)];
}

function finRange(vals: number[], padFrac = 0.05): [number, number] {
  const fin = vals.filter(Number.isFinite);
  if (fin.length === 0) return [0, 1];
  let lo = Math.min(...fin);
  let hi = Math.max(...fin);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = (hi - lo) * padFrac;
  return [lo - pad, hi + pad];
}

// ---------------------------------------------------------------------------
// renderers

export function renderCurves(path: string, style: Style): Raster {
  const t = readCsv(path);
  const idx = requireColumns(t, TRAINING_COLUMNS, path);
  const steps = numericColumn(t, idx.get("outer_step")!);
  const loss = numericColumn(t, idx.get("loss_total")!);
  const err = numericColumn(t, idx.get("rmae")!);
  const phases = t.rows.map((row) => row[idx.get("phase")!]);
  const segs = computePhaseSegments(steps, phases);

  const r = new Raster(style.width, style.height, style.background);
  const m = style.margin;
  const midGap = 28;
  const panelH = (style.height - m.top - m.bottom - midGap) / 2;
  const [l0, l1] = posRange(loss);
  const top = makePanel(r, style,
    [m.left, m.top, style.width - m.right, m.top + panelH],
    steps[0], steps[steps.length - 1], l0, l1, true, "", "loss");
  shadePhases(r, top, segs, style);
  polyline(r, top, steps, loss, style.series[0]);

  const bot = makePanel(r, style,
    [m.left, m.top + panelH + midGap, style.width - m.right,
     style.height - m.bottom],
    steps[0], steps[steps.length - 1], 0, Math.max(1, ...err.filter(
      Number.isFinite)) * 1.05, false, "outer step", "rmae");
  shadePhases(r, bot, segs, style);
  polyline(r, bot, steps, err, style.series[1]);
  return r;
}

export function renderDiagnostics(path: string, style: Style): Raster {
  const t = readCsv(path);
  const idx = requireColumns(t, TRAINING_COLUMNS, path);
  const steps = numericColumn(t, idx.get("outer_step")!);
  const inner = numericColumn(t, idx.get("inner_count")!);
  const grad = numericColumn(t, idx.get("grad_inf_norm")!);
  const pnorm = numericColumn(t, idx.get("param_l2_norm")!);

  const r = new Raster(style.width, style.height, style.background);
  const m = style.margin;
  const gap = 26;
  const panelH = (style.height - m.top - m.bottom - 2 * gap) / 3;
  const x1 = style.width - m.right;
  const xlo = steps[0];
  const xhi = steps[steps.length - 1];

  const p1 = makePanel(r, style, [m.left, m.top, x1, m.top + panelH],
    xlo, xhi, 0, Math.max(...inner) * 1.1 + 1, false, "", "inner count");
  polyline(r, p1, steps, inner, style.series[0]);

  const [g0, g1] = posRange(grad);
  const p2 = makePanel(r, style,
    [m.left, m.top + panelH + gap, x1, m.top + 2 * panelH + gap],
    xlo, xhi, g0, g1, true, "", "grad norm");
  polyline(r, p2, steps, grad, style.series[1]);

  const p3 = makePanel(r, style,
    [m.left, m.top + 2 * (panelH + gap), x1, style.height - m.bottom],
    xlo, xhi, 0, Math.max(...pnorm) * 1.1, false, "outer step",
    "param norm");
  polyline(r, p3, steps, pnorm, style.series[2]);
  return r;
}

function uniqueSorted(vals: number[]): number[] {
  return [...new Set(vals)].sort((a, b) => a - b);
}

export function renderHeatmap(path: string, style: Style): Raster {
  const t = readCsv(path);
  const idx = requireColumns(t, PLANE_COLUMNS, path);
  const alphas = numericColumn(t, idx.get("alpha")!);
  const betas = numericColumn(t, idx.get("beta")!);
  const loss = numericColumn(t, idx.get("loss")!);
  const err = numericColumn(t, idx.get("rmae")!);
  const ax = uniqueSorted(alphas);
  const bx = uniqueSorted(betas);

  const r = new Raster(style.width, style.height, style.background);
  const m = style.margin;
  const gap = 40;
  const panelW = (style.width - m.left - m.right - gap) / 2;

  const draw = (vals: number[], x0: number, title: string, log: boolean) => {
    const lo = log ? Math.log10(Math.max(Math.min(...vals.filter(
      (v) => v > 0), Infinity), 1e-300)) : Math.min(...vals);
    const hi = log ? Math.log10(Math.max(...vals, 1e-299)) : Math.max(...vals);
    const y0 = m.top + FONT_H + 4;
    const y1 = style.height - m.bottom;
    const cw = panelW / ax.length;
    const ch = (y1 - y0) / bx.length;
    for (let i = 0; i < vals.length; i++) {
      const xi = ax.indexOf(alphas[i]);
      const yi = bx.indexOf(betas[i]);
      const v = log ? Math.log10(Math.max(vals[i], 1e-300)) : vals[i];
      const norm = hi === lo ? 0.5 : (v - lo) / (hi - lo);
      r.fillRect(x0 + xi * cw, y1 - (yi + 1) * ch, cw + 1, ch + 1,
                 heatColor(style, norm));
    }
    r.text(x0 + panelW / 2 - measureText(title) / 2, m.top - 16, title,
           style.text);
    r.text(x0, y1 + 6, fmt(ax[0]), style.text);
    const last = fmt(ax[ax.length - 1]);
    r.text(x0 + panelW - measureText(last), y1 + 6, last, style.text);
    r.text(x0 + panelW / 2 - measureText("alpha") / 2, y1 + 6 + FONT_H,
           "alpha", style.text);
    r.textV(x0 - FONT_H - 4, (y0 + y1) / 2 + measureText("beta") / 2,
            "beta", style.text);
  };

  draw(loss, m.left, "loss (log)", true);
  draw(err, m.left + panelW + gap, "rmae", false);
  return r;
}

export function renderSegment(path: string, style: Style): Raster {
  const t = readCsv(path);
  const idx = requireColumns(t, SEGMENT_COLUMNS, path);
  const alphas = numericColumn(t, idx.get("alpha")!);
  const loss = numericColumn(t, idx.get("loss")!);
  const err = numericColumn(t, idx.get("rmae")!);

  const r = new Raster(style.width, style.height, style.background);
  const m = style.margin;
  const midGap = 28;
  const panelH = (style.height - m.top - m.bottom - midGap) / 2;
  const [l0, l1] = posRange(loss);
  const top = makePanel(r, style,
    [m.left, m.top, style.width - m.right, m.top + panelH],
    alphas[0], alphas[alphas.length - 1], l0, l1, true, "", "loss");
  polyline(r, top, alphas, loss, style.series[0]);
  for (let i = 0; i < alphas.length; i++) {
    r.marker(top.xs(alphas[i]), top.ys(loss[i]), style.series[0]);
  }
  const [e0, e1] = finRange(err);
  const bot = makePanel(r, style,
    [m.left, m.top + panelH + midGap, style.width - m.right,
     style.height - m.bottom],
    alphas[0], alphas[alphas.length - 1], Math.min(0, e0), e1, false,
    "alpha", "rmae");
  polyline(r, bot, alphas, err, style.series[1]);
  return r;
}

export function renderSweep(path: string, style: Style): Raster {
  const t = readCsv(path);
  const idx = requireColumns(t, SWEEP_COLUMNS, path);
  const ok = t.rows.filter((row) => row[idx.get("status")!] === "ok");
  const params = ok.map((row) => row[idx.get("param_value")!]);
  const precisions = [...new Set(ok.map((row) => row[idx.get("precision")!]))];
  const groups = [...new Set(params)];
  const rmae = ok.map((row) => Number(row[idx.get("final_rmae")!]));

  const r = new Raster(style.width, style.height, style.background);
  const m = style.margin;
  const p = makePanel(r, style,
    [m.left, m.top, style.width - m.right, style.height - m.bottom],
    0, Math.max(1, groups.length), 0,
    Math.max(1, ...rmae.filter(Number.isFinite)) * 1.1, false,
    "parameter value", "final rmae");

  const groupW = (p.x1 - p.x0) / Math.max(1, groups.length);
  const barW = (groupW * style.barWidth) / Math.max(1, precisions.length);
  ok.forEach((row, i) => {
    const gi = groups.indexOf(params[i]);
    const pi = precisions.indexOf(row[idx.get("precision")!]);
    const x = p.x0 + gi * groupW + groupW * (1 - style.barWidth) / 2
      + pi * barW;
    const y = p.ys(Number.isFinite(rmae[i]) ? rmae[i] : 0);
    r.fillRect(x, y, Math.max(1, barW - 2), p.y1 - y,
               style.series[pi % style.series.length]);
  });
  groups.forEach((g, gi) => {
    const label = fmt(Number(g));
    r.text(p.x0 + gi * groupW + groupW / 2 - measureText(label) / 2,
           p.y1 + 6, label, style.text);
  });
  precisions.forEach((prec, pi) => {
    const lx = p.x1 - 90;
    const ly = p.y0 + 6 + pi * (FONT_H + 4);
    r.fillRect(lx, ly, 10, 6, style.series[pi % style.series.length]);
    r.text(lx + 14, ly - 1, prec, style.text);
  });
  return r;
}

export type Kind = "curves" | "diagnostics" | "heatmap" | "segment" | "sweep";

export const RENDERERS: Record<Kind, (path: string, style: Style) => Raster> =
  {
    curves: renderCurves,
    diagnostics: renderDiagnostics,
    heatmap: renderHeatmap,
    segment: renderSegment,
    sweep: renderSweep,
  };
