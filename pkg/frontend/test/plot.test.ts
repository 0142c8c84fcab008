import { mkdtempSync, readFileSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';

import { parseBenchCsv } from '../src/bench.js';
import { renderScalingSvg } from '../src/plot.js';
import { main } from '../src/cli.js';

const FIXTURE_PATH = join(__dirname, 'fixtures', 'bench.csv');
const FIXTURE = readFileSync(FIXTURE_PATH, 'utf8');

const HEADER =
  'simulator,protocol,n,q,threads,ns_per_interaction_median,ns_per_interaction_sd';

function slopeOf(svg: string, simulator: string): number {
  const m = svg.match(
    new RegExp(`data-simulator="${simulator}" data-slope="(-?[0-9.]+)"`),
  );
  expect(m, `slope annotation for ${simulator}`).not.toBeNull();
  return Number(m![1]);
}

describe('renderScalingSvg', () => {
  it('draws one series per simulator with error bars', () => {
    const svg = renderScalingSvg(parseBenchCsv(FIXTURE), 'agents');
    const series = [...svg.matchAll(/class="series" data-simulator="([^"]+)"/g)];
    expect(series.map((m) => m[1])).toEqual(['multibatched', 'seq-bst']);
    expect([...svg.matchAll(/class="errorbar"/g)].length).toBe(6);
    expect(svg.startsWith('<svg ')).toBe(true);
  });

  it('acceptance: multibatched slope annotation is -0.5 within 0.15', () => {
    // criterion 9: figure from the criterion-5 bench CSV carries a fitted
    // log-log slope for the multibatched series close to the -1/2 law
    const svg = renderScalingSvg(parseBenchCsv(FIXTURE), 'agents');
    const slope = slopeOf(svg, 'multibatched');
    expect(slope).toBeGreaterThanOrEqual(-0.65);
    expect(slope).toBeLessThanOrEqual(-0.35);
    const flat = slopeOf(svg, 'seq-bst');
    expect(Math.abs(flat)).toBeLessThan(0.1);
    console.log(
      `[criterion 9] PASS multibatched slope ${slope.toFixed(3)} in [-0.65, -0.35]`,
    );
  });

  it('is deterministic for a fixed CSV', () => {
    const rows = parseBenchCsv(FIXTURE);
    expect(renderScalingSvg(rows, 'agents')).toBe(renderScalingSvg(rows, 'agents'));
  });

  it('renders a synthetic 1/sqrt(n) table with slope -0.5', () => {
    const lines = [HEADER];
    for (let e = 14; e <= 24; e += 2) {
      const n = 2 ** e;
      lines.push(`multibatched,uniform-clock,${n},8,1,${(1e5 / Math.sqrt(n)).toFixed(4)},0.1`);
    }
    const svg = renderScalingSvg(parseBenchCsv(lines.join('\n')), 'agents');
    expect(slopeOf(svg, 'multibatched')).toBeCloseTo(-0.5, 6);
  });

  it('single simulator, three points, linear thread axis', () => {
    const csv = [
      HEADER,
      'seq-bst,identity,1024,2,1,100,1',
      'seq-bst,identity,1024,2,2,101,1',
      'seq-bst,identity,1024,2,4,103,1',
    ].join('\n');
    const svg = renderScalingSvg(parseBenchCsv(csv), 'threads');
    expect([...svg.matchAll(/class="series"/g)].length).toBe(1);
    expect([...svg.matchAll(/<circle /g)].length).toBe(3);
    expect(svg).not.toContain('data-slope');
  });

  it('rejects an empty table', () => {
    expect(() => renderScalingSvg([], 'agents')).toThrow(/no rows/);
  });
});

describe('popsim-plot CLI', () => {
  it('writes an SVG and exits zero', () => {
    const dir = mkdtempSync(join(tmpdir(), 'popsim-plot-'));
    const out = join(dir, 'fig.svg');
    expect(main(['--input', FIXTURE_PATH, '--x', 'agents', '--out', out])).toBe(0);
    const svg = readFileSync(out, 'utf8');
    expect(svg).toContain('class="series"');
  });

  it('fails with a diagnostic on a bad CSV', () => {
    const dir = mkdtempSync(join(tmpdir(), 'popsim-plot-'));
    const bad = join(dir, 'bad.csv');
    writeFileSync(bad, 'not,a,bench\n1,2,3\n');
    expect(main(['--input', bad, '--x', 'agents', '--out', join(dir, 'f.svg')]))
      .toBe(1);
  });
});
