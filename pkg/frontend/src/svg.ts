/**
 * Minimal deterministic SVG chart primitives: no dependencies, no timestamps,
 * stable number formatting, so identical inputs give identical bytes.
 */

export interface LineSeries {
  xs: number[];
  ys: number[];
  color: string;
  label: string;
  dash?: string;
  markers?: boolean;
}

export interface PanelOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog?: boolean;
  yLog?: boolean;
  width?: number;
  height?: number;
}

export const PANEL_W = 460;
export const PANEL_H = 340;
const MARGIN = { left: 62, right: 14, top: 34, bottom: 46 };

export function fmt(x: number, digits = 6): string {
  if (!Number.isFinite(x)) return "0";
  const s = x.toPrecision(digits);
  return s.includes(".") || s.includes("e") ? s.replace(/\.?0+($|e)/, "$1") : s;
}

function tickLabel(x: number): string {
  const a = Math.abs(x);
  if (x !== 0 && (a >= 1e4 || a < 1e-3)) return x.toExponential(0);
  return fmt(x, 4);
}

export function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const raw = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const steps = [1, 2, 2.5, 5, 10];
  const step = mag * (steps.find((s) => raw / mag <= s) ?? 10);
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

export function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const dLo = Math.floor(Math.log10(lo));
  const dHi = Math.ceil(Math.log10(hi));
  for (let d = dLo; d <= dHi; d++) {
    for (const m of [1, 2, 5]) {
      const v = m * Math.pow(10, d);
      if (v >= lo * 0.999 && v <= hi * 1.001) ticks.push(v);
    }
  }
  return ticks.length ? ticks : [lo, hi];
}

function extent(values: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (!Number.isFinite(v)) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

/** Render one panel as a positioned <g> element. */
export function renderPanel(series: LineSeries[], opts: PanelOptions, originX = 0, originY = 0): string {
  const W = opts.width ?? PANEL_W;
  const H = opts.height ?? PANEL_H;
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;

  const finite = (arr: number[]) => arr.filter((v) => Number.isFinite(v) && (!opts.yLog || v > 0));
  let [xLo, xHi] = extent(series.map((s) => s.xs));
  let [yLo, yHi] = extent(series.map((s) => finite(s.ys)));
  if (opts.yLog) {
    yLo = yLo * 0.8;
    yHi = yHi * 1.25;
  } else {
    const pad = 0.06 * (yHi - yLo);
    yLo = Math.min(yLo, 0) === 0 && yLo >= 0 ? 0 : yLo - pad;
    yHi = yHi + pad;
  }
  if (opts.xLog) {
    xLo = xLo * 0.8;
    xHi = xHi * 1.25;
  }

  const sx = (x: number) =>
    MARGIN.left +
    (opts.xLog
      ? ((Math.log10(x) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo))) * plotW
      : ((x - xLo) / (xHi - xLo)) * plotW);
  const sy = (y: number) =>
    MARGIN.top +
    plotH -
    (opts.yLog
      ? ((Math.log10(y) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))) * plotH
      : ((y - yLo) / (yHi - yLo)) * plotH);

  const parts: string[] = [];
  parts.push(`<g transform="translate(${originX},${originY})">`);
  parts.push(`<rect x="0" y="0" width="${W}" height="${H}" fill="white"/>`);
  parts.push(
    `<text x="${W / 2}" y="${MARGIN.top - 14}" text-anchor="middle" font-size="13" font-family="sans-serif">${escapeXml(opts.title)}</text>`,
  );

  const xTicks = opts.xLog ? logTicks(xLo, xHi) : niceTicks(xLo, xHi);
  const yTicks = opts.yLog ? logTicks(yLo, yHi) : niceTicks(yLo, yHi);
  for (const v of xTicks) {
    const px = sx(v);
    parts.push(`<line x1="${fmt(px)}" y1="${MARGIN.top}" x2="${fmt(px)}" y2="${MARGIN.top + plotH}" stroke="#dddddd" stroke-width="0.6"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${MARGIN.top + plotH + 16}" text-anchor="middle" font-size="10" font-family="sans-serif">${tickLabel(v)}</text>`,
    );
  }
  for (const v of yTicks) {
    const py = sy(v);
    parts.push(`<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${MARGIN.left + plotW}" y2="${fmt(py)}" stroke="#dddddd" stroke-width="0.6"/>`);
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${fmt(py + 3)}" text-anchor="end" font-size="10" font-family="sans-serif">${tickLabel(v)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333" stroke-width="1"/>`,
  );
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${H - 10}" text-anchor="middle" font-size="11" font-family="sans-serif">${escapeXml(opts.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="11" font-family="sans-serif" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${escapeXml(opts.yLabel)}</text>`,
  );

  for (const s of series) {
    const pts: string[] = [];
    for (let i = 0; i < s.xs.length; i++) {
      const x = s.xs[i];
      const y = s.ys[i];
      if (!Number.isFinite(x) || !Number.isFinite(y) || (opts.yLog && y <= 0) || (opts.xLog && x <= 0)) continue;
      pts.push(`${fmt(sx(x))},${fmt(sy(y))}`);
    }
    if (!pts.length) continue;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    if (pts.length > 1) {
      parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="1.4"${dash}/>`);
    }
    if (s.markers || pts.length === 1) {
      for (const p of pts) {
        const [cx, cy] = p.split(",");
        parts.push(`<circle cx="${cx}" cy="${cy}" r="3" fill="${s.color}"/>`);
      }
    }
  }

  const legendEntries = series.filter((s) => s.label.length > 0);
  if (legendEntries.length) {
    let y = MARGIN.top + 10;
    const x = MARGIN.left + plotW - 150;
    for (const s of legendEntries) {
      parts.push(`<line x1="${x}" y1="${y}" x2="${x + 22}" y2="${y}" stroke="${s.color}" stroke-width="1.6"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
      parts.push(`<text x="${x + 28}" y="${y + 3.5}" font-size="10" font-family="sans-serif">${escapeXml(s.label)}</text>`);
      y += 14;
    }
  }
  parts.push(`</g>`);
  return parts.join("\n");
}

export function wrapSvg(content: string, width: number, height: number): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">\n` +
    content +
    `\n</svg>\n`
  );
}
