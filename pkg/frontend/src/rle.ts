/**
 * Run-length-encoded 2D slice mask — the wire format shared with the server.
 *
 * Runs are [row, colStart, length], sorted and non-overlapping;
 * decode(encode(m)) reproduces m for every mask.
 */

export interface RLEMask {
  axis: string;
  index: number;
  width: number;
  height: number;
  label: number;
  runs: [number, number, number][];
}

/** Decode to a row-major boolean bitmap of size height*width. */
export function decodeMask(mask: RLEMask): Uint8Array {
  const out = new Uint8Array(mask.height * mask.width);
  for (const [row, start, length] of mask.runs) {
    if (row < 0 || row >= mask.height || start < 0 || start + length > mask.width || length < 1) {
      throw new Error(`run [${row}, ${start}, ${length}] out of bounds`);
    }
    out.fill(1, row * mask.width + start, row * mask.width + start + length);
  }
  return out;
}

/** Encode a row-major boolean bitmap; inverse of decodeMask. */
export function encodeMask(
  bitmap: Uint8Array,
  width: number,
  height: number,
  meta: { axis?: string; index?: number; label?: number } = {},
): RLEMask {
  if (bitmap.length !== width * height) {
    throw new Error(`bitmap length ${bitmap.length} != ${width}x${height}`);
  }
  const runs: [number, number, number][] = [];
  for (let row = 0; row < height; row++) {
    let start = -1;
    for (let col = 0; col <= width; col++) {
      const on = col < width && bitmap[row * width + col] !== 0;
      if (on && start < 0) {
        start = col;
      } else if (!on && start >= 0) {
        runs.push([row, start, col - start]);
        start = -1;
      }
    }
  }
  return {
    axis: meta.axis ?? "z",
    index: meta.index ?? 0,
    width,
    height,
    label: meta.label ?? 1,
    runs,
  };
}

export function pixelCount(mask: RLEMask): number {
  return mask.runs.reduce((acc, [, , length]) => acc + length, 0);
}

/** Sorted "row,col" keys of every set pixel; handy for set equality. */
export function pixelSet(mask: RLEMask): Set<string> {
  const out = new Set<string>();
  for (const [row, start, length] of mask.runs) {
    for (let col = start; col < start + length; col++) {
      out.add(`${row},${col}`);
    }
  }
  return out;
}
