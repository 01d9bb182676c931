#!/usr/bin/env node
/**
 * marlperf-plots render --kind breakdown|scalability --input report.csv
 *                       --output chart.svg [--title ...] [--log-x] [--log-y]
 *
 * Writes the SVG plus `<output>.values.json` holding the exact plotted
 * value arrays (identical to the CSV cells) for downstream verification.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { renderBreakdown } from './breakdown.js';
import { SchemaError } from './csv.js';
import { renderScalability } from './scalability.js';

interface Args {
  kind: string;
  input: string;
  output: string;
  title?: string;
  logX: boolean;
  logY: boolean;
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== 'render') {
    throw new Error(`unknown command ${argv[0] ?? '(none)'}; expected "render"`);
  }
  const args: Partial<Args> = { logX: false, logY: false };
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i];
    switch (flag) {
      case '--kind':
        args.kind = argv[++i];
        break;
      case '--input':
        args.input = argv[++i];
        break;
      case '--output':
        args.output = argv[++i];
        break;
      case '--title':
        args.title = argv[++i];
        break;
      case '--log-x':
        args.logX = true;
        break;
      case '--log-y':
        args.logY = true;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  for (const key of ['kind', 'input', 'output'] as const) {
    if (!args[key]) throw new Error(`missing --${key}`);
  }
  if (args.kind !== 'breakdown' && args.kind !== 'scalability') {
    throw new Error(`unknown kind ${args.kind}; expected breakdown or scalability`);
  }
  return args as Args;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    const csvText = fs.readFileSync(args.input, 'utf-8');
    const title = args.title ?? path.basename(args.input);
    let svgText: string;
    let plotted: unknown;
    if (args.kind === 'breakdown') {
      const plot = renderBreakdown(csvText, title);
      svgText = plot.svg;
      plotted = plot.plotted;
    } else {
      const plot = renderScalability(csvText, title, {
        logX: args.logX,
        logY: args.logY,
      });
      svgText = plot.svg;
      plotted = plot.plotted;
    }
    fs.writeFileSync(args.output, svgText);
    fs.writeFileSync(`${args.output}.values.json`, JSON.stringify(plotted, null, 2) + '\n');
    console.log(`wrote ${args.output} and ${args.output}.values.json`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error:\n${err.message}`);
      return 2;
    }
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === `file://${path.resolve(process.argv[1])}`;
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
