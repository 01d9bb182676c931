import assert from 'node:assert/strict';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';
import { test } from 'node:test';

import { renderBreakdown } from '../src/breakdown.js';
import { run } from '../src/cli.js';
import { SchemaError } from '../src/csv.js';
import { renderScalability } from '../src/scalability.js';

const here = path.dirname(fileURLToPath(import.meta.url));
const testdata = path.join(here, '..', '..', 'testdata');

const breakdownGolden = fs.readFileSync(
  path.join(testdata, 'breakdown_golden.csv'),
  'utf-8',
);
const sweepGolden = fs.readFileSync(path.join(testdata, 'sweep_golden.csv'), 'utf-8');

function goldenCells(text: string): string[][] {
  return text
    .trim()
    .split('\n')
    .slice(1)
    .map((line) => line.split(','));
}

test('breakdown plotted arrays equal the CSV values exactly', () => {
  const plot = renderBreakdown(breakdownGolden, 'golden');
  const rows = goldenCells(breakdownGolden).filter((cells) => cells[1] === '0');
  assert.deepEqual(
    plot.plotted.iterations,
    rows.map((cells) => Number(cells[0])),
  );
  for (let c = 0; c < 5; c++) {
    assert.deepEqual(
      plot.plotted.values[c],
      rows.map((cells) => Number(cells[2 + c])),
      `category ${plot.plotted.categories[c]} must match the CSV exactly`,
    );
  }
  assert.deepEqual(
    plot.plotted.wallclock,
    rows.map((cells) => Number(cells[7])),
  );
});

test('breakdown excludes warmup rows and renders one bar per row', () => {
  const plot = renderBreakdown(breakdownGolden, 'golden');
  assert.equal(plot.plotted.iterations.length, 3); // 4 rows, 1 warmup
  assert.match(plot.svg, /<svg /);
  assert.match(plot.svg, /policy_inference_s/); // legend present
});

test('single-row breakdown renders a single bar', () => {
  const header = breakdownGolden.split('\n')[0];
  const row = breakdownGolden.trim().split('\n')[2];
  const plot = renderBreakdown(`${header}\n${row}\n`, 'one');
  assert.equal(plot.plotted.iterations.length, 1);
});

test('breakdown schema mismatch raises a header diff', () => {
  const mangled = breakdownGolden.replace('communication_s', 'comms_s');
  assert.throws(
    () => renderBreakdown(mangled, 'x'),
    (err: unknown) => {
      assert.ok(err instanceof SchemaError);
      assert.match((err as Error).message, /missing: communication_s/);
      assert.match((err as Error).message, /unexpected: comms_s/);
      return true;
    },
  );
});

test('stack heights track the wallclock guide on consistent data', () => {
  const plot = renderBreakdown(breakdownGolden, 'golden');
  plot.plotted.iterations.forEach((_, i) => {
    const stack = plot.plotted.values.reduce((acc, s) => acc + s[i], 0);
    const wall = plot.plotted.wallclock[i];
    assert.ok(Math.abs(stack - wall) / wall < 0.05);
  });
});

test('scalability plotted arrays equal the CSV values exactly', () => {
  const plot = renderScalability(sweepGolden, 'golden');
  const rows = goldenCells(sweepGolden);
  assert.deepEqual(plot.plotted.values, rows.map((c) => Number(c[1])));
  assert.deepEqual(plot.plotted.t_sg_s, rows.map((c) => Number(c[2])));
  assert.deepEqual(plot.plotted.t_mu_s, rows.map((c) => Number(c[3])));
  assert.deepEqual(plot.plotted.t_iteration_s, rows.map((c) => Number(c[4])));
  assert.deepEqual(plot.plotted.ips, rows.map((c) => Number(c[5])));
  assert.equal(plot.plotted.parameter, 'n_agents');
});

test('monotone decreasing ips renders a polyline through all points', () => {
  const plot = renderScalability(sweepGolden, 'golden');
  const ips = plot.plotted.ips;
  for (let i = 1; i < ips.length; i++) {
    assert.ok(ips[i] < ips[i - 1]);
  }
  const polylines = plot.svg.match(/<polyline /g) ?? [];
  assert.equal(polylines.length, 4); // three latency series + ips
});

test('two-point sweep renders straight segments without interpolation', () => {
  const lines = sweepGolden.trim().split('\n');
  const plot = renderScalability([lines[0], lines[1], lines[2]].join('\n'), 'two');
  assert.equal(plot.plotted.values.length, 2);
  const firstPolyline = plot.svg.match(/<polyline points="([^"]+)"/);
  assert.ok(firstPolyline);
  assert.equal(firstPolyline![1].split(' ').length, 2); // exactly two vertices
});

test('scalability needs at least two rows', () => {
  const lines = sweepGolden.trim().split('\n');
  assert.throws(() => renderScalability([lines[0], lines[1]].join('\n'), 'x'), SchemaError);
});

test('log flags annotate the axes', () => {
  const plot = renderScalability(sweepGolden, 'golden', { logX: true, logY: true });
  assert.match(plot.svg, /n_agents \(log\)/);
  assert.match(plot.svg, /seconds \(log\)/);
  assert.match(plot.svg, /IPS \(log\)/);
});

test('rendering is deterministic', () => {
  const a = renderBreakdown(breakdownGolden, 'golden').svg;
  const b = renderBreakdown(breakdownGolden, 'golden').svg;
  assert.equal(a, b);
  const c = renderScalability(sweepGolden, 'golden').svg;
  const d = renderScalability(sweepGolden, 'golden').svg;
  assert.equal(c, d);
});

test('cli renders both kinds and exports plotted values', () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'marlperf-plots-'));
  const breakdownCsv = path.join(testdata, 'breakdown_golden.csv');
  const out = path.join(dir, 'breakdown.svg');
  assert.equal(run(['render', '--kind', 'breakdown', '--input', breakdownCsv, '--output', out]), 0);
  assert.ok(fs.existsSync(out));
  const values = JSON.parse(fs.readFileSync(`${out}.values.json`, 'utf-8'));
  assert.equal(values.iterations.length, 3);

  const sweepCsv = path.join(testdata, 'sweep_golden.csv');
  const out2 = path.join(dir, 'sweep.svg');
  assert.equal(
    run(['render', '--kind', 'scalability', '--input', sweepCsv, '--output', out2, '--log-x']),
    0,
  );
  assert.ok(fs.readFileSync(out2, 'utf-8').includes('(log)'));
});

test('cli surfaces schema errors with exit code 2', () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'marlperf-plots-'));
  const bad = path.join(dir, 'bad.csv');
  fs.writeFileSync(bad, 'nope,nope\n1,2\n');
  const out = path.join(dir, 'x.svg');
  assert.equal(run(['render', '--kind', 'breakdown', '--input', bad, '--output', out]), 2);
});

test('cli rejects unknown kinds and flags', () => {
  assert.equal(run(['render', '--kind', 'pie', '--input', 'x', '--output', 'y']), 2);
  assert.equal(run(['render', '--whatever']), 2);
});
