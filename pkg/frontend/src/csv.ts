/**
 * Strict CSV reading for the marlperf report schemas.
 *
 * The producing CLI documents these headers as fixed; any mismatch is a
 * hard error that spells out the expected-vs-found difference so schema
 * drift is caught immediately.
 */

export const BREAKDOWN_HEADER = [
  'iteration',
  'warmup',
  'policy_inference_s',
  'communication_s',
  'env_step_s',
  'gradient_update_s',
  'buffer_ops_s',
  'wallclock_s',
  'comm_bytes',
];

export const SWEEP_HEADER = [
  'parameter',
  'value',
  't_sg_s',
  't_mu_s',
  't_iteration_s',
  'ips',
  'comm_pct_execution',
  'comm_pct_training',
];

export class SchemaError extends Error {}

export interface BreakdownRow {
  iteration: number;
  warmup: boolean;
  policyInference: number;
  communication: number;
  envStep: number;
  gradientUpdate: number;
  bufferOps: number;
  wallclock: number;
  commBytes: number;
}

export interface SweepRow {
  parameter: string;
  value: number;
  tSg: number;
  tMu: number;
  tIteration: number;
  ips: number;
  commPctExecution: number;
  commPctTraining: number;
}

function splitLines(text: string): string[] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0);
}

function checkHeader(found: string[], expected: string[], kind: string): void {
  if (found.length === expected.length && found.every((h, i) => h === expected[i])) {
    return;
  }
  const missing = expected.filter((h) => !found.includes(h));
  const unexpected = found.filter((h) => !expected.includes(h));
  const parts = [
    `${kind} header mismatch`,
    `expected: ${expected.join(',')}`,
    `*found*:  ${found.join(',')}`,
  ];
  if (missing.length > 0) parts.push(`missing: ${missing.join(',')}`);
  if (unexpected.length > 0) parts.push(`unexpected: ${unexpected.join(',')}`);
  throw new SchemaError(parts.join('\n'));
}

function num(cell: string, where: string): number {
  const value = Number(cell);
  if (!Number.isFinite(value)) {
    throw new SchemaError(`non-numeric cell ${JSON.stringify(cell)} in ${where}`);
  }
  return value;
}

export function parseBreakdown(text: string): BreakdownRow[] {
  const lines = splitLines(text);
  if (lines.length === 0) throw new SchemaError('empty breakdown CSV');
  checkHeader(lines[0].split(','), BREAKDOWN_HEADER, 'breakdown');
  return lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== BREAKDOWN_HEADER.length) {
      throw new SchemaError(
        `row ${i + 1} has ${cells.length} cells, expected ${BREAKDOWN_HEADER.length}`,
      );
    }
    const where = `breakdown row ${i + 1}`;
    return {
      iteration: num(cells[0], where),
      warmup: num(cells[1], where) !== 0,
      policyInference: num(cells[2], where),
      communication: num(cells[3], where),
      envStep: num(cells[4], where),
      gradientUpdate: num(cells[5], where),
      bufferOps: num(cells[6], where),
      wallclock: num(cells[7], where),
      commBytes: num(cells[8], where),
    };
  });
}

export function parseSweep(text: string): SweepRow[] {
  const lines = splitLines(text);
  if (lines.length === 0) throw new SchemaError('empty sweep CSV');
  checkHeader(lines[0].split(','), SWEEP_HEADER, 'sweep');
  return lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== SWEEP_HEADER.length) {
      throw new SchemaError(
        `row ${i + 1} has ${cells.length} cells, expected ${SWEEP_HEADER.length}`,
      );
    }
    const where = `sweep row ${i + 1}`;
    return {
      parameter: cells[0],
      value: num(cells[1], where),
      tSg: num(cells[2], where),
      tMu: num(cells[3], where),
      tIteration: num(cells[4], where),
      ips: num(cells[5], where),
      commPctExecution: num(cells[6], where),
      commPctTraining: num(cells[7], where),
    };
  });
}
