/**
 * Kind-aware value handling. The grammars here mirror the platform's
 * server-side validation exactly: the UI must never submit a value the
 * control service would reject, and every rendered value goes through a
 * kind-specific formatter.
 */

export type ItemKind = "Switch" | "Dimmer" | "Color" | "Temperature" | "Text";

export const ITEM_KINDS: ItemKind[] = [
  "Switch", "Dimmer", "Color", "Temperature", "Text",
];

const INT_RE = /^[0-9]{1,3}$/;
const NUM = "-?[0-9]+(?:\\.[0-9]+)?";
const COLOR_RE = new RegExp(`^\\((${NUM}),(${NUM}),(${NUM})\\)$`);
const TEMP_RE = new RegExp(`^${NUM}$`);

/** UTF-8 byte length without allocating an encoder per call. */
const UTF8 = new TextEncoder();

export function utf8Length(value: string): number {
  return UTF8.encode(value).length;
}

export interface Hsv {
  h: number;
  s: number;
  v: number;
}

export function parseColor(value: string): Hsv | null {
  const m = COLOR_RE.exec(value);
  if (!m) return null;
  const h = Number(m[1]);
  const s = Number(m[2]);
  const v = Number(m[3]);
  if (h < 0 || h >= 360 || s < 0 || s > 1 || v < 0 || v > 1) return null;
  return { h, s, v };
}

export function formatColor(c: Hsv): string {
  return `(${c.h},${c.s},${c.v})`;
}

/** Total validation: returns false for anything out of grammar, never throws. */
export function validateValue(kind: ItemKind, value: string): boolean {
  switch (kind) {
    case "Switch":
      return value === "ON" || value === "OFF";
    case "Dimmer":
      return INT_RE.test(value) && Number(value) >= 0 && Number(value) <= 100;
    case "Color":
      return parseColor(value) !== null;
    case "Temperature":
      return TEMP_RE.test(value) && Number(value) >= -50 && Number(value) <= 150;
    case "Text":
      return utf8Length(value) <= 1024;
  }
}

/** HSV -> CSS rgb() for color swatches. h in [0,360), s and v in [0,1]. */
export function hsvToCss(c: Hsv): string {
  const f = (n: number): number => {
    const k = (n + c.h / 60) % 6;
    return c.v - c.v * c.s * Math.max(0, Math.min(k, 4 - k, 1));
  };
  const to255 = (x: number) => Math.round(x * 255);
  return `rgb(${to255(f(5))}, ${to255(f(3))}, ${to255(f(1))})`;
}

/** Human-readable rendering for list and detail views. */
export function formatValue(kind: ItemKind, value: string | null): string {
  if (value === null) return "—";
  if (!validateValue(kind, value)) return value;
  switch (kind) {
    case "Dimmer":
      return `${Number(value)} %`;
    case "Temperature":
      return `${Number(value)} °C`;
    default:
      return value;
  }
}
