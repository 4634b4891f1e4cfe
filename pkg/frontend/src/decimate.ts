/** Chart series never exceed this many drawn points. */
export const MAX_CHART_POINTS = 10_000;

/**
 * Thin a series to at most `cap` points with a uniform stride.
 *
 * The first and last points always survive, so the plotted extent is
 * unchanged; interior points are sampled evenly. Order is preserved.
 */
export function decimate<T>(points: readonly T[], cap: number = MAX_CHART_POINTS): T[] {
  if (cap < 2) throw new Error("decimation cap must be at least 2");
  if (points.length <= cap) return [...points];
  const last = points.length - 1;
  const out: T[] = [];
  for (let i = 0; i < cap; i++) {
    const index = Math.round((i * last) / (cap - 1));
    out.push(points[index] as T);
  }
  return out;
}
