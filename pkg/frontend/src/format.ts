/**
 * Display formatting for values taken verbatim from API responses.
 *
 * Nothing here recomputes a quantity; each helper only reshapes the text of
 * a number or timestamp the backend already produced.
 */

/** One decimal place with a trailing ".0" stripped: 15 -> "15%", 62.5 -> "62.5%". */
export function formatPercent(value: number): string {
  if (!Number.isFinite(value)) {
    throw new RangeError(`percentage must be finite, got ${value}`);
  }
  return `${value.toFixed(1).replace(/\.0$/, "")}%`;
}

/** "2012-01-01T12:00:00Z" -> "2012-01-01 12:00Z" for axis ticks and captions. */
export function shortUtc(iso: string): string {
  const m = /^(\d{4}-\d{2}-\d{2})T(\d{2}:\d{2})(?::\d{2})?Z$/.exec(iso);
  return m ? `${m[1]} ${m[2]}Z` : iso;
}

/** "2012-01-01T12:00:00Z" -> "12:00" for dense tick rows. */
export function hourMinute(iso: string): string {
  const m = /T(\d{2}:\d{2})/.exec(iso);
  return m ? (m[1] as string) : iso;
}
