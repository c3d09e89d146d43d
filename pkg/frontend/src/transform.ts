// Coordinate math between display space and the normalized [0,1] space the
// API speaks, plus the drag-gesture interpretation. Everything here is pure
// so it runs (and is tested) outside a browser.

export interface Dims {
  width: number;
  height: number;
}

export interface DisplayRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface NormPoint {
  x: number;
  y: number;
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export function toNormalized(clientX: number, clientY: number, rect: DisplayRect): NormPoint {
  return {
    x: clamp01((clientX - rect.left) / rect.width),
    y: clamp01((clientY - rect.top) / rect.height),
  };
}

export function toDisplay(p: NormPoint, rect: DisplayRect): { x: number; y: number } {
  return { x: rect.left + p.x * rect.width, y: rect.top + p.y * rect.height };
}

/** Max display-space error of normalize->denormalize over a rect's corners and center. */
export function roundTripErrorPx(rect: DisplayRect, samples: Array<[number, number]>): number {
  let worst = 0;
  for (const [cx, cy] of samples) {
    const back = toDisplay(toNormalized(cx, cy, rect), rect);
    worst = Math.max(worst, Math.abs(back.x - cx), Math.abs(back.y - cy));
  }
  return worst;
}

export interface NormBox {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Two corners (any order) to a normalized box; degenerate drags return null. */
export function cornersToBox(a: NormPoint, b: NormPoint): NormBox | null {
  const x0 = Math.min(a.x, b.x);
  const x1 = Math.max(a.x, b.x);
  const y0 = Math.min(a.y, b.y);
  const y1 = Math.max(a.y, b.y);
  if (x1 - x0 < 1e-4 || y1 - y0 < 1e-4) return null;
  return { x0, y0, x1, y1 };
}

// Grounding instructions: concepts joined with "; ", split on ";" with
// trimming and empties dropped, mirroring the server's parsing rule.
export function joinConcepts(concepts: string[]): string {
  return concepts.join("; ");
}

export function splitConcepts(text: string): string[] {
  return text
    .split(";")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

export type DragIntent =
  | { kind: "remove" }
  | { kind: "move"; dx: number; dy: number };

/**
 * Interpret a mask drag at commit time: dragging the mask fully outside the
 * canvas means "remove the object"; anything else is a move by the offset
 * (zero offset included: the server treats move(0,0) as a no-op edit).
 */
export function dragIntent(
  maskBboxPx: [number, number, number, number],
  offsetPx: { dx: number; dy: number },
  canvas: Dims,
): DragIntent {
  const [x0, y0, x1, y1] = maskBboxPx;
  const nx0 = x0 + offsetPx.dx;
  const ny0 = y0 + offsetPx.dy;
  const nx1 = x1 + offsetPx.dx;
  const ny1 = y1 + offsetPx.dy;
  const fullyOutside = nx1 <= 0 || ny1 <= 0 || nx0 >= canvas.width || ny0 >= canvas.height;
  if (fullyOutside) return { kind: "remove" };
  return { kind: "move", dx: offsetPx.dx / canvas.width, dy: offsetPx.dy / canvas.height };
}
