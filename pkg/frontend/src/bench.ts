/** Parsing and validation of the bench CSV emitted by `popsim bench`. */

export interface BenchRow {
  simulator: string;
  protocol: string;
  n: number;
  q: number;
  threads: number;
  median: number;
  sd: number;
}

export type XAxis = 'agents' | 'states' | 'threads';

export const REQUIRED_COLUMNS = [
  'simulator',
  'protocol',
  'n',
  'q',
  'threads',
  'ns_per_interaction_median',
  'ns_per_interaction_sd',
] as const;

export function parseBenchCsv(text: string): BenchRow[] {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error('bench CSV is empty');
  }
  const header = lines[0].split(',').map((h) => h.trim());
  for (const col of REQUIRED_COLUMNS) {
    if (!header.includes(col)) {
      throw new Error(`bench CSV is missing column '${col}'`);
    }
  }
  const idx = (name: string) => header.indexOf(name);
  const rows: BenchRow[] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(',');
    if (parts.length !== header.length) {
      throw new Error(`malformed bench CSV row: ${line}`);
    }
    const row: BenchRow = {
      simulator: parts[idx('simulator')],
      protocol: parts[idx('protocol')],
      n: Number(parts[idx('n')]),
      q: Number(parts[idx('q')]),
      threads: Number(parts[idx('threads')]),
      median: Number(parts[idx('ns_per_interaction_median')]),
      sd: Number(parts[idx('ns_per_interaction_sd')]),
    };
    if (![row.n, row.q, row.threads, row.median, row.sd].every(Number.isFinite)) {
      throw new Error(`non-numeric field in bench CSV row: ${line}`);
    }
    if (row.median <= 0) {
      throw new Error(`ns_per_interaction_median must be positive: ${line}`);
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new Error('bench CSV has a header but no data rows');
  }
  return rows;
}

export function xValue(row: BenchRow, axis: XAxis): number {
  switch (axis) {
    case 'agents':
      return row.n;
    case 'states':
      return row.q;
    case 'threads':
      return row.threads;
  }
}

/** Group rows into one series per simulator, sorted for stable output. */
export function groupBySimulator(
  rows: BenchRow[],
  axis: XAxis,
): Map<string, BenchRow[]> {
  const series = new Map<string, BenchRow[]>();
  for (const row of rows) {
    const key = row.simulator;
    if (!series.has(key)) series.set(key, []);
    series.get(key)!.push(row);
  }
  const sorted = new Map<string, BenchRow[]>();
  for (const key of [...series.keys()].sort()) {
    sorted.set(
      key,
      series.get(key)!.slice().sort((a, b) => xValue(a, axis) - xValue(b, axis)),
    );
  }
  return sorted;
}

/** Least-squares slope of log10(median) against log10(x). */
export function logLogSlope(points: Array<[number, number]>): number | null {
  const usable = points.filter(([x, y]) => x > 0 && y > 0);
  if (usable.length < 2) return null;
  const xs = usable.map(([x]) => Math.log10(x));
  const ys = usable.map(([, y]) => Math.log10(y));
  const mx = xs.reduce((a, b) => a + b, 0) / xs.length;
  const my = ys.reduce((a, b) => a + b, 0) / ys.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < xs.length; i++) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  if (den === 0) return null;
  return num / den;
}
