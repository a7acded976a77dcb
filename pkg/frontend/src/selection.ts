// Token-range selection. All ranges are half-open [start, end) over token
// indices; construction goes through these helpers so the UI can never build
// an empty or out-of-bounds span.

export interface TokenRange {
  start: number;
  end: number;
}

export function rangeFromDrag(
  anchor: number,
  focus: number,
  tokenCount: number
): TokenRange | null {
  if (tokenCount <= 0) {
    return null;
  }
  if (!Number.isInteger(anchor) || !Number.isInteger(focus)) {
    return null;
  }
  const lo = Math.max(0, Math.min(anchor, focus));
  const hi = Math.min(tokenCount - 1, Math.max(anchor, focus));
  if (lo > hi) {
    return null; // drag happened entirely outside the document
  }
  return { start: lo, end: hi + 1 };
}

export function rangeLength(range: TokenRange | null): number {
  return range ? range.end - range.start : 0;
}

export function rangesOverlap(a: TokenRange, b: TokenRange): boolean {
  return a.start < b.end && b.start < a.end;
}

export function containsToken(range: TokenRange | null, index: number): boolean {
  return range !== null && index >= range.start && index < range.end;
}
