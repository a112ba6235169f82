// Declared formatting: the single source of truth for how service numbers
// become display strings. Contract tests compare rendered output against
// these exact functions applied to raw response fields.

export function sharePercent(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export function probability(x: number): string {
  return x.toFixed(3);
}

export function deltaPoints(baseline: number, post: number): string {
  const pts = (100 * (post - baseline)).toFixed(1);
  return pts.startsWith("-") ? `${pts} pp` : `+${pts} pp`;
}

export function count(n: number): string {
  return String(n);
}
