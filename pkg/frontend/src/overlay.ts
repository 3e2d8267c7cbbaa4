/**
 * Slice/overlay compositing and nearest-neighbor zoom, on raw pixel buffers
 * so the logic is testable without a canvas.  Base slices are 8-bit
 * grayscale; label overlays are RGBA with alpha 0 on unlabeled pixels.
 */

export interface Gray {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major, length width*height
}

export interface Rgba {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major, length width*height*4
}

/** Alpha-composite the label overlay over the base at the given opacity. */
export function composite(base: Gray, overlay: Rgba, opacity: number): Rgba {
  if (base.width !== overlay.width || base.height !== overlay.height) {
    throw new Error("base and overlay dimensions differ");
  }
  if (opacity < 0 || opacity > 1) {
    throw new Error(`opacity must be in [0, 1], got ${opacity}`);
  }
  const n = base.width * base.height;
  const out = new Uint8Array(n * 4);
  for (let i = 0; i < n; i++) {
    const g = base.pixels[i];
    const a = (overlay.pixels[i * 4 + 3] / 255) * opacity;
    out[i * 4] = Math.round(overlay.pixels[i * 4] * a + g * (1 - a));
    out[i * 4 + 1] = Math.round(overlay.pixels[i * 4 + 1] * a + g * (1 - a));
    out[i * 4 + 2] = Math.round(overlay.pixels[i * 4 + 2] * a + g * (1 - a));
    out[i * 4 + 3] = 255;
  }
  return { width: base.width, height: base.height, pixels: out };
}

/** Integer-factor nearest-neighbor zoom: each voxel becomes a zoom x zoom block. */
export function zoomNearest(image: Rgba, zoom: number): Rgba {
  if (!Number.isInteger(zoom) || zoom < 1) {
    throw new Error(`zoom must be a positive integer, got ${zoom}`);
  }
  const w = image.width * zoom;
  const h = image.height * zoom;
  const out = new Uint8Array(w * h * 4);
  for (let y = 0; y < h; y++) {
    const sy = Math.floor(y / zoom);
    for (let x = 0; x < w; x++) {
      const sx = Math.floor(x / zoom);
      const src = (sy * image.width + sx) * 4;
      const dst = (y * w + x) * 4;
      out[dst] = image.pixels[src];
      out[dst + 1] = image.pixels[src + 1];
      out[dst + 2] = image.pixels[src + 2];
      out[dst + 3] = image.pixels[src + 3];
    }
  }
  return { width: w, height: h, pixels: out };
}

export function grayToRgba(base: Gray): Rgba {
  const n = base.width * base.height;
  const out = new Uint8Array(n * 4);
  for (let i = 0; i < n; i++) {
    out[i * 4] = out[i * 4 + 1] = out[i * 4 + 2] = base.pixels[i];
    out[i * 4 + 3] = 255;
  }
  return { width: base.width, height: base.height, pixels: out };
}
