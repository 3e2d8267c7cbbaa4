/**
 * Zoom/pan mapping between screen pixels and slice pixel coordinates.
 *
 * Slice coordinates are (row, col) with pixel centers at integers, matching
 * the server's rasterization convention.  zoom must be > 0.
 */

export interface ViewTransform {
  zoom: number; // screen pixels per slice pixel
  panX: number; // screen x of slice col 0
  panY: number; // screen y of slice row 0
}

export interface ViewerState {
  datasetId: string;
  axis: "z" | "y" | "x";
  sliceIndex: number;
  window: [number, number];
  transform: ViewTransform;
  activeTool: "brush" | "wand" | "lasso" | "snakes";
  toolParams: Record<string, number>;
  overlayOpacity: number;
  activeLabel: number;
}

export function makeTransform(zoom = 1, panX = 0, panY = 0): ViewTransform {
  if (!(zoom > 0)) {
    throw new Error(`zoom must be > 0, got ${zoom}`);
  }
  return { zoom, panX, panY };
}

export function screenToSlice(
  t: ViewTransform,
  screenX: number,
  screenY: number,
): { row: number; col: number } {
  return {
    row: (screenY - t.panY) / t.zoom,
    col: (screenX - t.panX) / t.zoom,
  };
}

export function sliceToScreen(
  t: ViewTransform,
  row: number,
  col: number,
): { x: number; y: number } {
  return {
    x: col * t.zoom + t.panX,
    y: row * t.zoom + t.panY,
  };
}

/** Zoom about a fixed screen point so the slice pixel under it stays put. */
export function zoomAbout(
  t: ViewTransform,
  factor: number,
  screenX: number,
  screenY: number,
): ViewTransform {
  const zoom = t.zoom * factor;
  if (!(zoom > 0)) {
    throw new Error(`zoom must stay > 0, got ${zoom}`);
  }
  return {
    zoom,
    panX: screenX - (screenX - t.panX) * factor,
    panY: screenY - (screenY - t.panY) * factor,
  };
}

export function pan(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { zoom: t.zoom, panX: t.panX + dx, panY: t.panY + dy };
}
