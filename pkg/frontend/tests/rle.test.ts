import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { decodeMask, encodeMask, pixelCount, type RLEMask } from "../src/rle.js";

interface GoldenCase {
  mask: RLEMask;
  bitmap: string[]; // rows of "0"/"1" characters
}

const golden: GoldenCase[] = JSON.parse(
  readFileSync(new URL("../fixtures/rle_golden.json", import.meta.url), "utf-8"),
);

function bitmapOf(rows: string[]): Uint8Array {
  const h = rows.length;
  const w = rows[0].length;
  const out = new Uint8Array(h * w);
  rows.forEach((row, r) => {
    for (let c = 0; c < w; c++) {
      out[r * w + c] = row[c] === "1" ? 1 : 0;
    }
  });
  return out;
}

describe("RLE codec against 100 golden server encodings", () => {
  it("has 100 cases", () => {
    expect(golden).toHaveLength(100);
  });

  it("decode reproduces every golden bitmap", () => {
    for (const { mask, bitmap } of golden) {
      expect(decodeMask(mask)).toEqual(bitmapOf(bitmap));
    }
  });

  it("encode reproduces every golden run list", () => {
    for (const { mask, bitmap } of golden) {
      const encoded = encodeMask(bitmapOf(bitmap), mask.width, mask.height, {
        axis: mask.axis,
        index: mask.index,
        label: mask.label,
      });
      expect(encoded).toEqual(mask);
    }
  });

  it("pixelCount matches the number of set bits", () => {
    for (const { mask, bitmap } of golden) {
      const ones = bitmap.join("").split("").filter((ch) => ch === "1").length;
      expect(pixelCount(mask)).toBe(ones);
    }
  });
});

describe("RLE roundtrip", () => {
  it("decode(encode(m)) == m on random bitmaps", () => {
    let seed = 12345;
    const rand = () => {
      // LCG keeps the test deterministic without a dependency
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let trial = 0; trial < 50; trial++) {
      const w = 1 + Math.floor(rand() * 20);
      const h = 1 + Math.floor(rand() * 20);
      const bitmap = new Uint8Array(w * h);
      for (let i = 0; i < bitmap.length; i++) {
        bitmap[i] = rand() < 0.4 ? 1 : 0;
      }
      expect(decodeMask(encodeMask(bitmap, w, h))).toEqual(bitmap);
    }
  });

  it("rejects out-of-bounds runs", () => {
    const bad: RLEMask = { axis: "z", index: 0, width: 4, height: 4, label: 1, runs: [[0, 2, 5]] };
    expect(() => decodeMask(bad)).toThrow(/out of bounds/);
  });
});
