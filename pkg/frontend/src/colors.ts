/**
 * The 15-class fire-weather lattice: labels and fill colors, ordinal 1..15.
 *
 * Both tables mirror the backend exactly (five major hues, the "-" sub-level
 * lightened and the "+" sub-level darkened); a snapshot test pins every hex
 * value so the map, legend, and pies can never drift from the API's labels.
 */

export const CLASS_LABELS: readonly string[] = [
  "low-",
  "low",
  "low+",
  "moderate-",
  "moderate",
  "moderate+",
  "high-",
  "high",
  "high+",
  "very high-",
  "very high",
  "very high+",
  "extreme-",
  "extreme",
  "extreme+",
];

export const CLASS_COLORS: readonly string[] = [
  "#6da470",
  "#2e7d32",
  "#235e26",
  "#5b93d3",
  "#1565c0",
  "#104c90",
  "#fbc266",
  "#f9a825",
  "#bb7e1c",
  "#f4984d",
  "#ef6c00",
  "#b35100",
  "#d76969",
  "#c62828",
  "#951e1e",
];

function checkOrdinal(ordinal: number): number {
  if (!Number.isInteger(ordinal) || ordinal < 1 || ordinal > 15) {
    throw new RangeError(`class ordinal out of range 1..15: ${ordinal}`);
  }
  return ordinal;
}

export function classLabel(ordinal: number): string {
  return CLASS_LABELS[checkOrdinal(ordinal) - 1] as string;
}

export function classColor(ordinal: number): string {
  return CLASS_COLORS[checkOrdinal(ordinal) - 1] as string;
}

export function ordinalForLabel(label: string): number {
  const i = CLASS_LABELS.indexOf(label);
  if (i < 0) {
    throw new RangeError(`unknown class label: ${label}`);
  }
  return i + 1;
}

export interface LegendEntry {
  ordinal: number;
  label: string;
  color: string;
}

export function legendEntries(): LegendEntry[] {
  return CLASS_LABELS.map((label, i) => ({
    ordinal: i + 1,
    label,
    color: CLASS_COLORS[i] as string,
  }));
}
