#!/usr/bin/env node
/** popsim-plot --input bench.csv --x agents|states|threads --out fig.svg */

import { readFileSync, writeFileSync } from 'fs';
import { parseBenchCsv, XAxis } from './bench.js';
import { renderScalingSvg } from './plot.js';

function usage(): never {
  console.error(
    'usage: popsim-plot --input bench.csv --x agents|states|threads --out fig.svg',
  );
  process.exit(2);
}

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--') || i + 1 >= argv.length) usage();
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  const input = args.get('input');
  const xAxis = (args.get('x') ?? 'agents') as XAxis;
  const out = args.get('out');
  if (!input || !out) usage();
  if (!['agents', 'states', 'threads'].includes(xAxis)) usage();
  try {
    const rows = parseBenchCsv(readFileSync(input, 'utf8'));
    const svg = renderScalingSvg(rows, xAxis);
    writeFileSync(out, svg);
    console.log(`wrote ${out} (${rows.length} rows, x=${xAxis})`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith('cli.js')) {
  process.exit(main(process.argv.slice(2)));
}
