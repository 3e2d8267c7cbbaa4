/**
 * Minimal browser wiring: dataset picker, slice viewer with zoom/pan and
 * window/level, label overlay, tool buttons, and the job panel.  All heavy
 * computation happens server-side; this file only renders and dispatches.
 */

import { HarpiaClient, type JobInfo } from "./api.js";
import { JobPanel } from "./jobPanel.js";
import { pixelSet, type RLEMask } from "./rle.js";
import { ToolDispatcher, type ToolEvent } from "./tools.js";
import {
  makeTransform,
  pan,
  screenToSlice,
  zoomAbout,
  type ViewerState,
} from "./viewTransform.js";

const client = new HarpiaClient("");
const canvas = document.getElementById("viewer") as HTMLCanvasElement;
const overlayCanvas = document.getElementById("overlay") as HTMLCanvasElement;
const errorBanner = document.getElementById("error-banner") as HTMLElement;
const jobList = document.getElementById("job-list") as HTMLElement;

const state: ViewerState = {
  datasetId: "",
  axis: "z",
  sliceIndex: 0,
  window: [0, 255],
  transform: makeTransform(4),
  activeTool: "wand",
  toolParams: { tolerance: 10, radius: 2, iterations: 50, balloon: 1 },
  overlayOpacity: 0.5,
  activeLabel: 1,
};

let dims = { width: 0, height: 0 };
let dispatcher: ToolDispatcher | null = null;
let preview: RLEMask | null = null;
let lassoPath: [number, number][] = [];

function showError(message: string | null): void {
  errorBanner.textContent = message ?? "";
  errorBanner.style.display = message ? "block" : "none";
}

async function refreshSlice(): Promise<void> {
  const img = new Image();
  img.onload = () => {
    const ctx = canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false; // nearest-neighbor: crisp voxel edges
    ctx.setTransform(state.transform.zoom, 0, 0, state.transform.zoom,
      state.transform.panX, state.transform.panY);
    ctx.clearRect(-1e6, -1e6, 2e6, 2e6);
    ctx.drawImage(img, 0, 0);
    showError(null);
  };
  img.onerror = () => showError("slice fetch failed; showing last image");
  img.src = client.sliceUrl(state.datasetId, state.axis, state.sliceIndex, state.window);
  await refreshOverlay();
}

async function refreshOverlay(): Promise<void> {
  const img = new Image();
  img.onload = () => {
    const ctx = overlayCanvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.setTransform(state.transform.zoom, 0, 0, state.transform.zoom,
      state.transform.panX, state.transform.panY);
    ctx.clearRect(-1e6, -1e6, 2e6, 2e6);
    ctx.globalAlpha = state.overlayOpacity;
    ctx.drawImage(img, 0, 0);
    drawPreview(ctx);
  };
  img.src = client.labelOverlayUrl(state.datasetId, state.axis, state.sliceIndex);
}

function drawPreview(ctx: CanvasRenderingContext2D): void {
  if (!preview) return;
  ctx.globalAlpha = 0.7;
  ctx.fillStyle = "#ffcc00";
  for (const key of pixelSet(preview)) {
    const [row, col] = key.split(",").map(Number);
    ctx.fillRect(col, row, 1, 1);
  }
}

async function loadDataset(path: string): Promise<void> {
  const { id } = await client.registerDataset(path);
  const info = await client.datasetInfo(id);
  state.datasetId = id;
  state.window = info.window;
  const [z, y, x] = info.shape;
  dims = state.axis === "z" ? { width: x, height: y }
    : state.axis === "y" ? { width: x, height: z }
    : { width: y, height: z };
  state.sliceIndex = 0;
  dispatcher = new ToolDispatcher(client, id, dims);
  await refreshSlice();
}

canvas.addEventListener("pointerdown", (ev) => {
  if (!dispatcher) return;
  const { row, col } = screenToSlice(state.transform, ev.offsetX, ev.offsetY);
  if (state.activeTool === "lasso") {
    lassoPath.push([row, col]);
    return;
  }
  const event: ToolEvent = {
    tool: state.activeTool,
    axis: state.axis,
    index: state.sliceIndex,
    label: state.activeLabel,
    seed: [Math.round(row), Math.round(col)],
    path: [[row, col]],
    params: state.toolParams,
  };
  dispatcher.dispatch(event).then(
    (mask) => {
      preview = mask;
      void refreshOverlay();
    },
    (err) => showError(String(err)),
  );
});

canvas.addEventListener("dblclick", () => {
  if (!dispatcher || state.activeTool !== "lasso" || lassoPath.length < 3) return;
  dispatcher
    .dispatch({
      tool: "lasso",
      axis: state.axis,
      index: state.sliceIndex,
      label: state.activeLabel,
      path: lassoPath,
    })
    .then((mask) => {
      preview = mask;
      lassoPath = [];
      void refreshOverlay();
    }, (err) => showError(String(err)));
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const factor = ev.deltaY < 0 ? 1.25 : 0.8;
  state.transform = zoomAbout(state.transform, factor, ev.offsetX, ev.offsetY);
  void refreshSlice();
});

document.getElementById("commit")!.addEventListener("click", () => {
  if (!dispatcher || !preview) return;
  dispatcher.commitPreview(preview).then(() => {
    preview = null;
    void refreshOverlay();
  }, (err) => showError(String(err)));
});

document.getElementById("undo")!.addEventListener("click", () => {
  void client.undoLabels(state.datasetId).then(() => refreshOverlay());
});

for (const tool of ["brush", "wand", "lasso", "snakes"] as const) {
  document.getElementById(`tool-${tool}`)?.addEventListener("click", () => {
    state.activeTool = tool;
    lassoPath = [];
  });
}

document.getElementById("slice-prev")!.addEventListener("click", () => {
  state.sliceIndex = Math.max(0, state.sliceIndex - 1);
  void refreshSlice();
});
document.getElementById("slice-next")!.addEventListener("click", () => {
  state.sliceIndex += 1;
  void refreshSlice();
});
document.getElementById("pan-reset")!.addEventListener("click", () => {
  state.transform = pan(makeTransform(state.transform.zoom), 0, 0);
  void refreshSlice();
});

const panel = new JobPanel(client, () => void refreshOverlay());
panel.start();
setInterval(() => {
  jobList.innerHTML = "";
  if (panel.view.emptyMessage) {
    jobList.textContent = panel.view.emptyMessage;
    return;
  }
  for (const row of panel.view.rows) {
    const el = document.createElement("div");
    el.textContent = `${row.op} ${row.badge}`;
    if (row.cancellable) {
      const btn = document.createElement("button");
      btn.textContent = "cancel";
      btn.addEventListener("click", () => void panel.cancel(row.id));
      el.appendChild(btn);
    }
    jobList.appendChild(el);
  }
}, 1000);

document.getElementById("dataset-form")!.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const input = document.getElementById("dataset-path") as HTMLInputElement;
  loadDataset(input.value).catch((err) => showError(String(err)));
});

(document.getElementById("job-form") as HTMLFormElement).addEventListener("submit", (ev) => {
  ev.preventDefault();
  const op = (document.getElementById("job-op") as HTMLInputElement).value;
  client.submitJob(state.datasetId, op).catch((err) => showError(String(err)));
});
