/** Deterministic SVG scaling figures in the style of the bench plots:
 * median line per simulator with standard-deviation error bars, log-log
 * axes for agents/states and linear axes for threads, and a fitted
 * log-log slope annotation per series on logarithmic plots. */

import { BenchRow, XAxis, groupBySimulator, logLogSlope, xValue } from './bench.js';

const WIDTH = 760;
const HEIGHT = 480;
const MARGIN = { left: 70, right: 180, top: 40, bottom: 55 };

const PALETTE = [
  '#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd', '#8c564b',
  '#e377c2', '#7f7f7f',
];

const AXIS_LABEL: Record<XAxis, string> = {
  agents: 'number of agents n',
  states: 'number of states |Q|',
  threads: 'threads',
};

interface Scale {
  (v: number): number;
  ticks: number[];
}

function logScale(min: number, max: number, lo: number, hi: number): Scale {
  const lmin = Math.log10(min);
  const lmax = Math.log10(max);
  const span = lmax - lmin || 1;
  const fn = ((v: number) => lo + ((Math.log10(v) - lmin) / span) * (hi - lo)) as Scale;
  const ticks: number[] = [];
  for (let e = Math.ceil(lmin); e <= Math.floor(lmax); e++) ticks.push(10 ** e);
  if (ticks.length < 2) ticks.push(min, max);
  fn.ticks = [...new Set(ticks)].sort((a, b) => a - b);
  return fn;
}

function linScale(min: number, max: number, lo: number, hi: number): Scale {
  const span = max - min || 1;
  const fn = ((v: number) => lo + ((v - min) / span) * (hi - lo)) as Scale;
  const count = 5;
  fn.ticks = Array.from({ length: count + 1 },
    (_, i) => min + (span * i) / count);
  return fn;
}

function fmt(v: number): string {
  if (v >= 10000 || (v > 0 && v < 0.01)) {
    const e = Math.round(Math.log10(v));
    if (Math.abs(v - 10 ** e) / v < 1e-9) return `1e${e}`;
    return v.toExponential(1);
  }
  return Number.isInteger(v) ? String(v) : v.toPrecision(3);
}

function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

/** Render the figure; returns the SVG document as a string. */
export function renderScalingSvg(rows: BenchRow[], axis: XAxis): string {
  if (rows.length === 0) {
    throw new Error('no rows to plot');
  }
  const series = groupBySimulator(rows, axis);
  const logAxes = axis !== 'threads';

  const xs = rows.map((r) => xValue(r, axis));
  const ysLow = rows.map((r) => Math.max(r.median - r.sd, r.median * 0.5));
  const ysHigh = rows.map((r) => r.median + r.sd);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ysLow);
  const yMax = Math.max(...ysHigh);

  const plotL = MARGIN.left;
  const plotR = WIDTH - MARGIN.right;
  const plotT = MARGIN.top;
  const plotB = HEIGHT - MARGIN.bottom;
  const sx = logAxes
    ? logScale(xMin, xMax, plotL, plotR)
    : linScale(Math.min(xMin, 1), xMax, plotL, plotR);
  const sy = logAxes
    ? logScale(yMin * 0.8, yMax * 1.25, plotB, plotT)
    : linScale(0, yMax * 1.1, plotB, plotT);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${(plotL + plotR) / 2}" y="20" text-anchor="middle" font-size="14">` +
    `time per interaction vs ${esc(AXIS_LABEL[axis])}</text>`,
  );

  // frame and ticks
  parts.push(
    `<rect x="${plotL}" y="${plotT}" width="${plotR - plotL}" ` +
    `height="${plotB - plotT}" fill="none" stroke="#333"/>`,
  );
  for (const t of sx.ticks) {
    const x = sx(t);
    if (x < plotL - 1 || x > plotR + 1) continue;
    parts.push(`<line x1="${x.toFixed(1)}" y1="${plotB}" x2="${x.toFixed(1)}" ` +
      `y2="${plotB + 5}" stroke="#333"/>`);
    parts.push(`<text x="${x.toFixed(1)}" y="${plotB + 18}" text-anchor="middle">` +
      `${fmt(t)}</text>`);
  }
  for (const t of sy.ticks) {
    const y = sy(t);
    if (y < plotT - 1 || y > plotB + 1) continue;
    parts.push(`<line x1="${plotL - 5}" y1="${y.toFixed(1)}" x2="${plotL}" ` +
      `y2="${y.toFixed(1)}" stroke="#333"/>`);
    parts.push(`<text x="${plotL - 8}" y="${(y + 4).toFixed(1)}" ` +
      `text-anchor="end">${fmt(t)}</text>`);
  }
  parts.push(
    `<text x="${(plotL + plotR) / 2}" y="${HEIGHT - 12}" text-anchor="middle">` +
    `${esc(AXIS_LABEL[axis])}</text>`,
  );
  parts.push(
    `<text x="18" y="${(plotT + plotB) / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 18 ${(plotT + plotB) / 2})">ns per interaction</text>`,
  );

  let legendY = plotT + 10;
  let color = 0;
  for (const [simulator, pts] of series) {
    const stroke = PALETTE[color % PALETTE.length];
    color += 1;
    const coords = pts.map((r) => [sx(xValue(r, axis)), sy(r.median)] as const);
    const path = coords.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(' ');
    parts.push(
      `<polyline class="series" data-simulator="${esc(simulator)}" ` +
      `points="${path}" fill="none" stroke="${stroke}" stroke-width="1.8"/>`,
    );
    for (const r of pts) {
      const x = sx(xValue(r, axis));
      const yLow = sy(Math.max(r.median - r.sd, logAxes ? r.median * 0.5 : 0));
      const yHigh = sy(r.median + r.sd);
      parts.push(
        `<line class="errorbar" x1="${x.toFixed(1)}" y1="${yLow.toFixed(1)}" ` +
        `x2="${x.toFixed(1)}" y2="${yHigh.toFixed(1)}" stroke="${stroke}"/>`,
      );
      parts.push(
        `<circle cx="${x.toFixed(1)}" cy="${sy(r.median).toFixed(1)}" r="3" ` +
        `fill="${stroke}"/>`,
      );
    }
    let label = simulator;
    if (logAxes) {
      const slope = logLogSlope(pts.map((r) => [xValue(r, axis), r.median]));
      if (slope !== null) {
        label += ` (slope ${slope.toFixed(2)})`;
        parts.push(
          `<text class="slope" data-simulator="${esc(simulator)}" ` +
          `data-slope="${slope.toFixed(4)}" x="${plotR + 12}" y="${legendY + 14}" ` +
          `font-size="11" fill="#555">fitted log-log slope ${slope.toFixed(2)}</text>`,
        );
      }
    }
    parts.push(
      `<line x1="${plotR + 12}" y1="${legendY - 4}" x2="${plotR + 34}" ` +
      `y2="${legendY - 4}" stroke="${stroke}" stroke-width="1.8"/>`,
    );
    parts.push(`<text x="${plotR + 40}" y="${legendY}" font-size="11">` +
      `${esc(label)}</text>`);
    legendY += logAxes ? 34 : 20;
  }
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}
