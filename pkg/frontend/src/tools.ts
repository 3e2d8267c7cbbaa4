/**
 * Tool event dispatch: wand/lasso/snakes call the annotate endpoints and
 * return a preview mask; brush rasterizes disk stamps locally.  Nothing
 * mutates labels until commitPreview() posts the mask explicitly.
 */

import type { HarpiaClient } from "./api.js";
import { encodeMask, type RLEMask } from "./rle.js";

export interface ToolEvent {
  tool: "brush" | "wand" | "lasso" | "snakes";
  axis: string;
  index: number;
  label: number;
  /** (row, col) pointer path in slice pixel space (after inverse view transform). */
  path?: [number, number][];
  seed?: [number, number];
  params?: Record<string, number>;
}

export interface SliceDims {
  width: number;
  height: number;
}

/** Rasterize disk stamps of the given radius along a pointer path. */
export function brushMask(
  path: [number, number][],
  radius: number,
  dims: SliceDims,
  meta: { axis?: string; index?: number; label?: number } = {},
): RLEMask {
  if (radius < 1) {
    throw new Error(`brush radius must be >= 1, got ${radius}`);
  }
  const bitmap = new Uint8Array(dims.width * dims.height);
  const r2 = (radius - 0.5) ** 2; // radius 1 stamps a single pixel
  for (const [row, col] of path) {
    const cr = Math.round(row);
    const cc = Math.round(col);
    for (let dr = -radius; dr <= radius; dr++) {
      for (let dc = -radius; dc <= radius; dc++) {
        if (dr * dr + dc * dc > r2 && !(dr === 0 && dc === 0)) continue;
        const rr = cr + dr;
        const cl = cc + dc;
        if (rr >= 0 && rr < dims.height && cl >= 0 && cl < dims.width) {
          bitmap[rr * dims.width + cl] = 1;
        }
      }
    }
  }
  return encodeMask(bitmap, dims.width, dims.height, meta);
}

/**
 * Run a tool event and return the preview mask.  One in-flight request per
 * tool: concurrent dispatches for the same tool reuse the pending promise.
 */
export class ToolDispatcher {
  private inFlight = new Map<string, Promise<RLEMask>>();

  constructor(
    private client: HarpiaClient,
    private dataset: string,
    private dims: SliceDims,
  ) {}

  dispatch(event: ToolEvent): Promise<RLEMask> {
    const pending = this.inFlight.get(event.tool);
    if (pending) {
      return pending;
    }
    const promise = this.run(event).finally(() => this.inFlight.delete(event.tool));
    this.inFlight.set(event.tool, promise);
    return promise;
  }

  private run(event: ToolEvent): Promise<RLEMask> {
    const meta = { axis: event.axis, index: event.index, label: event.label };
    switch (event.tool) {
      case "brush":
        return Promise.resolve(
          brushMask(event.path ?? [], event.params?.radius ?? 1, this.dims, meta),
        );
      case "wand":
        if (!event.seed) throw new Error("wand needs a seed");
        return this.client.wand(this.dataset, {
          axis: event.axis,
          index: event.index,
          seed: event.seed,
          tolerance: event.params?.tolerance ?? 0,
          label: event.label,
        });
      case "lasso":
        if (!event.path || event.path.length < 3) throw new Error("lasso needs >= 3 vertices");
        return this.client.lasso(this.dataset, {
          axis: event.axis,
          index: event.index,
          polygon: event.path,
          label: event.label,
        });
      case "snakes": {
        if (!event.path || event.path.length === 0) throw new Error("snakes needs an init path");
        const init = brushMask(event.path, event.params?.radius ?? 1, this.dims, meta);
        return this.client.snakes(this.dataset, {
          axis: event.axis,
          index: event.index,
          init,
          iterations: event.params?.iterations ?? 50,
          smoothing: event.params?.smoothing ?? 1,
          balloon: event.params?.balloon ?? 0,
        });
      }
    }
  }

  /** Explicit commit: post the previewed mask into the label volume. */
  commitPreview(mask: RLEMask, mode: "set" | "erase" = "set"): Promise<{ applied: number; mode: string }> {
    return this.client.applyMask(this.dataset, mask, mode);
  }
}
