/**
 * Stacked-bar chart of per-iteration phase time, one bar per
 * non-warmup iteration, with a wallclock guide line. The plotted value
 * arrays are returned untransformed (seconds straight from the CSV) so
 * they can be exported and verified against the input.
 */

import { BreakdownRow, SchemaError, parseBreakdown } from './csv.js';
import * as svg from './svg.js';

export const CATEGORY_LABELS = [
  'policy_inference_s',
  'communication_s',
  'env_step_s',
  'gradient_update_s',
  'buffer_ops_s',
] as const;

const CATEGORY_COLORS = ['#4e79a7', '#f28e2b', '#59a14f', '#e15759', '#b07aa1'];

export interface BreakdownPlot {
  svg: string;
  plotted: {
    iterations: number[];
    categories: string[];
    values: number[][]; // [category][iteration], seconds as parsed
    wallclock: number[];
  };
}

export function renderBreakdown(csvText: string, title: string): BreakdownPlot {
  const rows = parseBreakdown(csvText).filter((r) => !r.warmup);
  if (rows.length < 1) {
    throw new SchemaError('need at least one non-warmup row to plot');
  }
  const values = [
    rows.map((r) => r.policyInference),
    rows.map((r) => r.communication),
    rows.map((r) => r.envStep),
    rows.map((r) => r.gradientUpdate),
    rows.map((r) => r.bufferOps),
  ];
  const wallclock = rows.map((r) => r.wallclock);
  const iterations = rows.map((r) => r.iteration);

  const width = 720;
  const height = 420;
  const margin = { top: 48, right: 24, bottom: 48, left: 72 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const stackTotals = rows.map((_, i) =>
    values.reduce((acc, series) => acc + series[i], 0),
  );
  const yMax = Math.max(...stackTotals, ...wallclock) || 1;
  const y = svg.linearScale(0, yMax, margin.top + plotH, margin.top);

  const slot = plotW / rows.length;
  const barW = Math.min(48, slot * 0.7);

  const body: string[] = [];
  body.push(svg.text(width / 2, 24, title, 14, 'middle'));
  body.push(
    svg.line(margin.left, margin.top + plotH, margin.left + plotW, margin.top + plotH, '#444'),
  );
  body.push(svg.line(margin.left, margin.top, margin.left, margin.top + plotH, '#444'));
  body.push(svg.text(16, margin.top - 8, 'seconds', 11));

  for (let tick = 0; tick <= 4; tick++) {
    const value = (yMax * tick) / 4;
    body.push(svg.line(margin.left - 4, y(value), margin.left, y(value), '#444'));
    body.push(svg.text(margin.left - 8, y(value) + 4, value.toPrecision(3), 10, 'end'));
  }

  rows.forEach((row, i) => {
    const x = margin.left + slot * i + (slot - barW) / 2;
    let cursor = 0;
    values.forEach((series, c) => {
      const v = series[i];
      if (v <= 0) return;
      const y0 = y(cursor + v);
      const h = y(cursor) - y0;
      body.push(
        svg.rect(x, y0, barW, h, CATEGORY_COLORS[c], `${CATEGORY_LABELS[c]}: ${v} s`),
      );
      cursor += v;
    });
    body.push(svg.text(x + barW / 2, y(cursor) - 4, cursor.toPrecision(3), 9, 'middle'));
    // wallclock guide per bar
    body.push(svg.line(x - 4, y(wallclock[i]), x + barW + 4, y(wallclock[i]), '#333'));
    body.push(
      svg.text(x + barW / 2, margin.top + plotH + 16, String(row.iteration), 10, 'middle'),
    );
  });
  body.push(svg.text(width / 2, height - 12, 'iteration', 11, 'middle'));

  CATEGORY_LABELS.forEach((label, c) => {
    const lx = margin.left + 8 + c * 130;
    body.push(svg.rect(lx, 32, 10, 10, CATEGORY_COLORS[c]));
    body.push(svg.text(lx + 14, 41, label, 10));
  });

  return {
    svg: svg.document(width, height, body),
    plotted: {
      iterations,
      categories: [...CATEGORY_LABELS],
      values,
      wallclock,
    },
  };
}
