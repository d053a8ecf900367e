/**
 * Figure layouts over the harness CSVs.
 *
 *  - mean-diff:  |optimal mean - empirical mean| over time, one curve per M
 *  - cov-trace:  optimal covariance trace (green) vs empirical traces per M
 *  - two-panel:  the two comparison panels side by side for one sampling rate
 *  - gap-vs-M:   settled covariance gap against ensemble size on log-log
 *                axes, with a least-squares slope fit and the theoretical
 *                bound overlay when theory columns are present
 *
 * Colors follow the comparison convention: optimal green, M=10 blue,
 * M=20 red.
 */

import { SeriesTable, column, lateWindowMean } from "./csv.js";
import { LineSeries, PANEL_H, PANEL_W, fmt, renderPanel, wrapSvg } from "./svg.js";

export const PANELS = ["mean-diff", "cov-trace", "two-panel", "gap-vs-M"] as const;
export type PanelKind = (typeof PANELS)[number];

const OPTIMAL_COLOR = "#2ca02c";
const M_COLORS = new Map<number, string>([
  [10, "#1f77b4"],
  [20, "#d62728"],
]);
const FALLBACK_COLORS = ["#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2"];

export function colorForTable(table: SeriesTable, index: number): string {
  if (table.M !== null && M_COLORS.has(table.M)) return M_COLORS.get(table.M)!;
  return FALLBACK_COLORS[index % FALLBACK_COLORS.length];
}

function labelForTable(table: SeriesTable): string {
  return table.M !== null ? `M = ${table.M}` : table.path.split("/").pop() ?? table.path;
}

function sortByM(tables: SeriesTable[]): SeriesTable[] {
  return [...tables].sort((a, b) => (a.M ?? Infinity) - (b.M ?? Infinity));
}

function titleSuffix(tables: SeriesTable[]): string {
  const lams = new Set(tables.map((t) => t.lambda).filter((v): v is number => v !== null));
  return lams.size === 1 ? ` (rate ${[...lams][0]})` : "";
}

export function meanDiffSeries(tables: SeriesTable[]): LineSeries[] {
  return sortByM(tables).map((t, i) => ({
    xs: column(t, "t"),
    ys: column(t, "mean_diff_norm"),
    color: colorForTable(t, i),
    label: labelForTable(t),
  }));
}

export function covTraceSeries(tables: SeriesTable[]): LineSeries[] {
  const sorted = sortByM(tables);
  const series: LineSeries[] = sorted.map((t, i) => ({
    xs: column(t, "t"),
    ys: column(t, "emp_cov_trace"),
    color: colorForTable(t, i),
    label: `empirical, ${labelForTable(t)}`,
  }));
  series.unshift({
    xs: column(sorted[0], "t"),
    ys: column(sorted[0], "opt_cov_trace"),
    color: OPTIMAL_COLOR,
    label: "optimal",
  });
  return series;
}

export interface SlopeFit {
  slope: number;
  intercept: number;
}

/** Least-squares fit of log(gap) against log(M). */
export function fitLogLogSlope(ms: number[], gaps: number[]): SlopeFit {
  const xs = ms.map(Math.log);
  const ys = gaps.map(Math.log);
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxy = 0;
  let sxx = 0;
  for (let i = 0; i < n; i++) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

export interface GapPoints {
  ms: number[];
  gaps: number[];
  bounds: number[] | null;
  fit: SlopeFit;
}

export function gapVsMPoints(tables: SeriesTable[]): GapPoints {
  const sorted = sortByM(tables);
  if (sorted.some((t) => t.M === null)) {
    const bad = sorted.filter((t) => t.M === null).map((t) => t.path);
    throw new Error(`gap-vs-M needs an _M<count> filename tag; missing on: ${bad.join(", ")}`);
  }
  if (sorted.length < 2) {
    throw new Error("gap-vs-M needs at least two ensemble sizes");
  }
  const ms = sorted.map((t) => t.M!);
  const gaps = sorted.map((t) => lateWindowMean(t, "cov_gap"));
  const withTheory = sorted.every((t) => t.hasTheory && Number.isFinite(column(t, "theory_bound")[0]));
  const bounds = withTheory ? sorted.map((t) => column(t, "theory_bound")[0]) : null;
  return { ms, gaps, bounds, fit: fitLogLogSlope(ms, gaps) };
}

export function renderMeanDiff(tables: SeriesTable[], title?: string): string {
  const g = renderPanel(meanDiffSeries(tables), {
    title: title ?? "Mean difference vs time" + titleSuffix(tables),
    xLabel: "t",
    yLabel: "|optimal mean - empirical mean|",
  });
  return wrapSvg(g, PANEL_W, PANEL_H);
}

export function renderCovTrace(tables: SeriesTable[], title?: string): string {
  const g = renderPanel(covTraceSeries(tables), {
    title: title ?? "Covariance trace vs time" + titleSuffix(tables),
    xLabel: "t",
    yLabel: "covariance trace",
  });
  return wrapSvg(g, PANEL_W, PANEL_H);
}

export function renderTwoPanel(tables: SeriesTable[], title?: string): string {
  const left = renderPanel(meanDiffSeries(tables), {
    title: (title ? title + ": " : "") + "Mean difference" + titleSuffix(tables),
    xLabel: "t",
    yLabel: "|optimal mean - empirical mean|",
  });
  const right = renderPanel(
    covTraceSeries(tables),
    {
      title: (title ? title + ": " : "") + "Covariance traces" + titleSuffix(tables),
      xLabel: "t",
      yLabel: "covariance trace",
    },
    PANEL_W + 12,
    0,
  );
  return wrapSvg(left + "\n" + right, 2 * PANEL_W + 12, PANEL_H);
}

export function renderGapVsM(tables: SeriesTable[], title?: string): string {
  const { ms, gaps, bounds, fit } = gapVsMPoints(tables);
  const fitLine: LineSeries = {
    xs: ms,
    ys: ms.map((m) => Math.exp(fit.intercept + fit.slope * Math.log(m))),
    color: "#888888",
    label: `slope fit ${fmt(fit.slope, 3)}`,
    dash: "5,3",
  };
  const series: LineSeries[] = [
    { xs: ms, ys: gaps, color: "#1f77b4", label: "settled covariance gap", markers: true },
    fitLine,
  ];
  if (bounds) {
    series.push({ xs: ms, ys: bounds, color: "#2ca02c", label: "theoretical bound", dash: "2,3", markers: true });
  }
  const g = renderPanel(series, {
    title: title ?? "Covariance gap vs ensemble size",
    xLabel: "M",
    yLabel: "covariance gap",
    xLog: true,
    yLog: true,
  });
  return wrapSvg(g, PANEL_W, PANEL_H);
}

export function renderFigure(kind: PanelKind, tables: SeriesTable[], title?: string): string {
  if (!tables.length) throw new Error("at least one CSV is required");
  switch (kind) {
    case "mean-diff":
      return renderMeanDiff(tables, title);
    case "cov-trace":
      return renderCovTrace(tables, title);
    case "two-panel":
      return renderTwoPanel(tables, title);
    case "gap-vs-M":
      return renderGapVsM(tables, title);
  }
}
