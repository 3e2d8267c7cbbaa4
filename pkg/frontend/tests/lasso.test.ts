import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { HarpiaClient } from "../src/api.js";
import { decodeMask, pixelSet, type RLEMask } from "../src/rle.js";
import { ToolDispatcher } from "../src/tools.js";

interface LassoCase {
  polygon: [number, number][];
  width: number;
  height: number;
  mask: RLEMask;
}

const golden: LassoCase[] = JSON.parse(
  readFileSync(new URL("../fixtures/lasso_golden.json", import.meta.url), "utf-8"),
);

/** Mock server: answers lasso with the golden mask, records apply payloads. */
function mockServer(serverMask: RLEMask) {
  const applied: RLEMask[] = [];
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    if (url.endsWith("/annotate/lasso")) {
      return new Response(JSON.stringify(serverMask), { status: 200 });
    }
    if (url.endsWith("/annotate/apply")) {
      const payload = JSON.parse(String(init?.body));
      applied.push(payload.mask);
      const count = payload.mask.runs.reduce(
        (acc: number, run: number[]) => acc + run[2],
        0,
      );
      return new Response(JSON.stringify({ applied: count, mode: payload.mode }), {
        status: 200,
      });
    }
    return new Response(JSON.stringify({ detail: "unexpected" }), { status: 500 });
  };
  return { fetchImpl, applied };
}

describe("lasso preview/commit round-trip on 5 scripted polygons", () => {
  it("has 5 scripted polygons", () => {
    expect(golden).toHaveLength(5);
  });

  for (const [i, testCase] of golden.entries()) {
    it(`polygon ${i}: preview pixel set == committed mask pixel set`, async () => {
      const { fetchImpl, applied } = mockServer(testCase.mask);
      const client = new HarpiaClient("http://mock", fetchImpl);
      const tools = new ToolDispatcher(client, "ds1", {
        width: testCase.width,
        height: testCase.height,
      });

      const preview = await tools.dispatch({
        tool: "lasso",
        axis: "z",
        index: 0,
        label: 1,
        path: testCase.polygon,
      });
      const result = await tools.commitPreview(preview);

      expect(applied).toHaveLength(1);
      expect(pixelSet(applied[0])).toEqual(pixelSet(preview));
      expect(result.applied).toBe(preview.runs.reduce((acc, [, , len]) => acc + len, 0));
      // the preview decodes to the exact pixel set the server rasterized
      expect(decodeMask(preview)).toEqual(decodeMask(testCase.mask));
    });
  }

  it("rectangle with 0.5-offset corners fills 12 pixels", () => {
    // 3 rows (1..3) x 4 cols (1..4) of integer centers inside the rectangle
    expect(pixelSet(golden[0].mask).size).toBe(12);
  });

  it("no labels change without an explicit commit", async () => {
    const { fetchImpl, applied } = mockServer(golden[1].mask);
    const client = new HarpiaClient("http://mock", fetchImpl);
    const tools = new ToolDispatcher(client, "ds1", {
      width: golden[1].width,
      height: golden[1].height,
    });
    await tools.dispatch({
      tool: "lasso",
      axis: "z",
      index: 0,
      label: 1,
      path: golden[1].polygon,
    });
    expect(applied).toHaveLength(0);
  });
});
