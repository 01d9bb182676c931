/**
 * Dual-axis scalability chart: phase and iteration latencies on the
 * left axis, iterations-per-second on the right axis, against the swept
 * parameter. Straight segments between measured points, no smoothing or
 * interpolation; plotted arrays come back exactly as parsed.
 */

import { SchemaError, SweepRow, parseSweep } from './csv.js';
import * as svg from './svg.js';

const LATENCY_SERIES: Array<[string, (r: SweepRow) => number, string]> = [
  ['t_sg_s', (r) => r.tSg, '#4e79a7'],
  ['t_mu_s', (r) => r.tMu, '#f28e2b'],
  ['t_iteration_s', (r) => r.tIteration, '#59a14f'],
];
const IPS_COLOR = '#e15759';

export interface ScalabilityPlot {
  svg: string;
  plotted: {
    parameter: string;
    values: number[];
    t_sg_s: number[];
    t_mu_s: number[];
    t_iteration_s: number[];
    ips: number[];
  };
}

export interface ScalabilityOptions {
  logX?: boolean;
  logY?: boolean;
}

export function renderScalability(
  csvText: string,
  title: string,
  options: ScalabilityOptions = {},
): ScalabilityPlot {
  const rows = parseSweep(csvText);
  if (rows.length < 2) {
    throw new SchemaError('need at least two sweep rows to plot a trend');
  }
  const parameter = rows[0].parameter;

  const width = 720;
  const height = 420;
  const margin = { top: 48, right: 72, bottom: 48, left: 72 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const xs = rows.map((r) => r.value);
  const latencies = LATENCY_SERIES.flatMap(([, get]) => rows.map(get));
  const ips = rows.map((r) => r.ips);

  const makeScale = (log: boolean | undefined) => (log ? svg.logScale : svg.linearScale);
  const x = makeScale(options.logX)(
    Math.min(...xs), Math.max(...xs), margin.left, margin.left + plotW,
  );
  const yLeft = makeScale(options.logY)(
    options.logY ? Math.min(...latencies) : 0,
    Math.max(...latencies) || 1,
    margin.top + plotH,
    margin.top,
  );
  const yRight = makeScale(options.logY)(
    options.logY ? Math.min(...ips) : 0,
    Math.max(...ips) || 1,
    margin.top + plotH,
    margin.top,
  );

  const body: string[] = [];
  body.push(svg.text(width / 2, 24, title, 14, 'middle'));
  body.push(
    svg.line(margin.left, margin.top + plotH, margin.left + plotW, margin.top + plotH, '#444'),
  );
  body.push(svg.line(margin.left, margin.top, margin.left, margin.top + plotH, '#444'));
  body.push(
    svg.line(margin.left + plotW, margin.top, margin.left + plotW, margin.top + plotH, '#444'),
  );
  const axisNote = (flag: boolean | undefined) => (flag ? ' (log)' : '');
  body.push(svg.text(16, margin.top - 8, `seconds${axisNote(options.logY)}`, 11));
  body.push(
    svg.text(width - 16, margin.top - 8, `IPS${axisNote(options.logY)}`, 11, 'end'),
  );
  body.push(
    svg.text(width / 2, height - 12, `${parameter}${axisNote(options.logX)}`, 11, 'middle'),
  );

  xs.forEach((v) => {
    body.push(svg.line(x(v), margin.top + plotH, x(v), margin.top + plotH + 4, '#444'));
    body.push(svg.text(x(v), margin.top + plotH + 16, String(v), 10, 'middle'));
  });

  LATENCY_SERIES.forEach(([label, get, color], idx) => {
    body.push(svg.polyline(rows.map((r) => [x(r.value), yLeft(get(r))]), color));
    rows.forEach((r) => {
      body.push(svg.rect(x(r.value) - 2, yLeft(get(r)) - 2, 4, 4, color, `${label}: ${get(r)}`));
    });
    const lx = margin.left + 8 + idx * 130;
    body.push(svg.rect(lx, 32, 10, 10, color));
    body.push(svg.text(lx + 14, 41, label, 10));
  });

  body.push(svg.polyline(rows.map((r) => [x(r.value), yRight(r.ips)]), IPS_COLOR));
  rows.forEach((r) => {
    body.push(svg.rect(x(r.value) - 2, yRight(r.ips) - 2, 4, 4, IPS_COLOR, `ips: ${r.ips}`));
  });
  const lx = margin.left + 8 + 3 * 130;
  body.push(svg.rect(lx, 32, 10, 10, IPS_COLOR));
  body.push(svg.text(lx + 14, 41, 'ips (right)', 10));

  return {
    svg: svg.document(width, height, body),
    plotted: {
      parameter,
      values: xs,
      t_sg_s: rows.map((r) => r.tSg),
      t_mu_s: rows.map((r) => r.tMu),
      t_iteration_s: rows.map((r) => r.tIteration),
      ips,
    },
  };
}
