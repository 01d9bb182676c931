/** Minimal deterministic SVG assembly (no dependencies, no state). */

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export interface Scale {
  (value: number): number;
}

export function linearScale(
  domainMin: number,
  domainMax: number,
  rangeMin: number,
  rangeMax: number,
): Scale {
  const span = domainMax - domainMin || 1;
  return (value) => rangeMin + ((value - domainMin) / span) * (rangeMax - rangeMin);
}

export function logScale(
  domainMin: number,
  domainMax: number,
  rangeMin: number,
  rangeMax: number,
): Scale {
  const lo = Math.log(Math.max(domainMin, Number.MIN_VALUE));
  const hi = Math.log(Math.max(domainMax, Number.MIN_VALUE));
  const span = hi - lo || 1;
  return (value) =>
    rangeMin +
    ((Math.log(Math.max(value, Number.MIN_VALUE)) - lo) / span) * (rangeMax - rangeMin);
}

export function rect(
  x: number,
  y: number,
  width: number,
  height: number,
  fill: string,
  title?: string,
): string {
  const tooltip = title ? `<title>${escapeXml(title)}</title>` : '';
  return (
    `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${width.toFixed(2)}" ` +
    `height="${height.toFixed(2)}" fill="${fill}">${tooltip}</rect>`
  );
}

export function text(
  x: number,
  y: number,
  content: string,
  size = 11,
  anchor = 'start',
  extra = '',
): string {
  return (
    `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-size="${size}" ` +
    `font-family="sans-serif" text-anchor="${anchor}"${extra}>` +
    `${escapeXml(content)}</text>`
  );
}

export function line(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  stroke: string,
  width = 1,
): string {
  return (
    `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" ` +
    `y2="${y2.toFixed(2)}" stroke="${stroke}" stroke-width="${width}"/>`
  );
}

export function polyline(points: Array<[number, number]>, stroke: string): string {
  const path = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(' ');
  return `<polyline points="${path}" fill="none" stroke="${stroke}" stroke-width="2"/>`;
}

export function document(width: number, height: number, body: string[]): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n<rect width="100%" height="100%" fill="white"/>\n` +
    body.join('\n') +
    '\n</svg>\n'
  );
}
