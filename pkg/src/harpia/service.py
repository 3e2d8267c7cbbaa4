"""REST job service: dataset registry, slice images, async job queue,
and low-latency annotation endpoints.

Heavy operators run through the chunk engine on a single worker (FIFO);
interactive annotation bypasses the queue.  After every job all working
buffers are released, so the ledger's current count returns exactly to
the pre-job baseline.
"""

from __future__ import annotations

import io
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Query, Response
from fastapi.responses import JSONResponse
from PIL import Image

from . import annotate as annotate_mod
from .chunking import DEFAULT_FRACTION, profile_budget
from .errors import HarpiaError, JobCancelled, ParameterError
from .ledger import LEDGER
from .quantify import label_metrics, metrics_to_csv
from .registry import get_operator, run_operator, validate_params
from .volume import (
    LabelVolume,
    Volume,
    default_window,
    load_volume,
    read_slice,
)

JOB_STATES = ("queued", "running", "done", "failed", "cancelled")

# default palette cycled over label ids for overlay rendering
_PALETTE = (
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212),
)


@dataclass
class Dataset:
    id: str
    volume: Volume
    labels: LabelVolume
    created_at: float
    status: str = "ready"
    window: tuple[float, float] = (0.0, 255.0)
    lock: threading.Lock = field(default_factory=threading.Lock)
    snapshots: list[np.ndarray] = field(default_factory=list)

    def snapshot_labels(self, keep: int):
        self.snapshots.append(self.labels.labels.copy())
        del self.snapshots[:-keep]


@dataclass
class Job:
    id: str
    op: str
    params: dict
    dataset_id: str
    target: str
    state: str = "queued"
    error: Optional[str] = None
    report: Optional[dict] = None
    cancel_requested: bool = False

    def as_dict(self):
        return {
            "id": self.id,
            "op": self.op,
            "params": {k: v for k, v in self.params.items() if _jsonable(v)},
            "dataset": self.dataset_id,
            "target": self.target,
            "state": self.state,
            "error": self.error,
            "report": self.report,
        }


def _jsonable(v):
    return isinstance(v, (int, float, str, bool, type(None), list, tuple))


class ServiceState:
    def __init__(self, budget_fraction: float, workers: int, queue_size: int, snapshot_keep: int):
        self.datasets: dict[str, Dataset] = {}
        self.jobs: dict[str, Job] = {}
        self.job_order: list[str] = []
        self.queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self.budget_fraction = budget_fraction
        self.snapshot_keep = snapshot_keep
        self.workers = [
            threading.Thread(target=self._worker_loop, daemon=True, name=f"harpia-worker-{i}")
            for i in range(workers)
        ]
        for w in self.workers:
            w.start()

    # ------------------------------------------------------------------
    def _worker_loop(self):
        while True:
            job = self.queue.get()
            if job is None:
                return
            if job.cancel_requested:
                job.state = "cancelled"
                continue
            self._run_job(job)

    def _run_job(self, job: Job):
        job.state = "running"
        ds = self.datasets[job.dataset_id]
        baseline = LEDGER.job_start()
        try:
            op = get_operator(job.op)
            source = ds.labels.labels if job.target == "labels" else ds.volume.data
            aux = {}
            if "markers" in op.aux_keys:
                aux["markers"] = ds.labels.labels
            budget = profile_budget(fraction=self.budget_fraction)
            result, report = run_operator(
                source,
                job.op,
                job.params,
                budget,
                aux=aux,
                cancel=lambda: job.cancel_requested,
                validate=False,
            )
            with ds.lock:
                if op.output == "labels" or job.target == "labels":
                    old = ds.labels.labels.nbytes
                    ds.labels = LabelVolume(result, spacing=ds.volume.spacing)
                    LEDGER.commit_persistent(ds.labels.labels.nbytes - old)
                else:
                    old = ds.volume.data.nbytes
                    ds.volume = ds.volume.with_data(result)
                    ds.window = default_window(ds.volume)
                    LEDGER.commit_persistent(ds.volume.data.nbytes - old)
            snap = LEDGER.snapshot()
            job.report = {
                "chunk_count": report.chunk_count,
                "wall_seconds": report.wall_seconds,
                "peak_bytes": report.peak_bytes,
                "residual_bytes": snap.residual_bytes,
                "baseline_bytes": baseline,
            }
            job.state = "done"
        except JobCancelled:
            job.state = "cancelled"
        except HarpiaError as exc:
            job.state = "failed"
            job.error = str(exc)
        except Exception as exc:  # pragma: no cover - defensive
            job.state = "failed"
            job.error = f"internal error: {exc}"

    def shutdown(self):
        for _ in self.workers:
            self.queue.put(None)


def _png_response(array: np.ndarray, mode: str) -> Response:
    img = Image.fromarray(array, mode=mode)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png")


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(
    budget_fraction: float = DEFAULT_FRACTION,
    workers: int = 1,
    queue_size: int = 64,
    snapshot_keep: int = 5,
) -> FastAPI:
    app = FastAPI(title="harpia", version="0.1.0")
    state = ServiceState(budget_fraction, workers, queue_size, snapshot_keep)
    app.state.harpia = state

    def dataset_or_none(dataset_id: str) -> Optional[Dataset]:
        return state.datasets.get(dataset_id)

    # ------------------------------------------------------------- datasets
    @app.post("/datasets", status_code=201)
    def register_dataset(payload: dict):
        data_path = payload.get("data_path")
        meta_path = payload.get("meta_path")
        if not data_path:
            return _error(422, "data_path is required")
        try:
            volume = load_volume(data_path, meta_path)
        except (OSError, HarpiaError) as exc:
            return _error(422, f"could not load volume: {exc}")
        dataset_id = uuid.uuid4().hex[:12]
        ds = Dataset(
            id=dataset_id,
            volume=volume,
            labels=LabelVolume.empty_like(volume),
            created_at=time.time(),
            window=default_window(volume),
        )
        LEDGER.charge(ds.labels.labels.nbytes)
        state.datasets[dataset_id] = ds
        return {"id": dataset_id}

    @app.get("/datasets/{dataset_id}")
    def dataset_info(dataset_id: str):
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(404, "unknown dataset")
        return {
            "id": ds.id,
            "shape": list(ds.volume.shape),
            "dtype": str(ds.volume.dtype),
            "spacing": list(ds.volume.spacing),
            "window": list(ds.window),
            "status": ds.status,
        }

    @app.get("/datasets/{dataset_id}/slice/{axis}/{index}")
    def slice_image(
        dataset_id: str,
        axis: str,
        index: int,
        low: Optional[float] = Query(default=None),
        high: Optional[float] = Query(default=None),
    ):
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(404, "unknown dataset")
        window = (
            ds.window
            if low is None or high is None
            else (low, high)
        )
        try:
            plane = read_slice(ds.volume, axis, index, window)
        except IndexError as exc:
            return _error(404, str(exc))
        except ParameterError as exc:
            return _error(422, str(exc))
        return _png_response(plane, "L")

    @app.get("/datasets/{dataset_id}/labels/{axis}/{index}")
    def label_overlay(dataset_id: str, axis: str, index: int):
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(404, "unknown dataset")
        axes = {"z": 0, "y": 1, "x": 2}
        if axis not in axes:
            return _error(422, f"bad axis {axis!r}")
        ax = axes[axis]
        if not 0 <= index < ds.labels.shape[ax]:
            return _error(404, "slice index out of range")
        plane = np.take(ds.labels.labels, index, axis=ax)
        rgba = np.zeros(plane.shape + (4,), dtype=np.uint8)
        for label_id in np.unique(plane):
            if label_id == 0:
                continue  # label 0 stays transparent
            color = ds.labels.palette.get(
                int(label_id), _PALETTE[(int(label_id) - 1) % len(_PALETTE)]
            )
            sel = plane == label_id
            rgba[sel, 0:3] = color
            rgba[sel, 3] = 255
        return _png_response(rgba, "RGBA")

    @app.get("/datasets/{dataset_id}/metrics")
    def metrics(dataset_id: str, format: str = "csv"):
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(404, "unknown dataset")
        rows = label_metrics(ds.labels.labels, ds.volume.spacing)
        if format == "json":
            return {"metrics": [row.as_tuple() for row in rows]}
        return Response(content=metrics_to_csv(rows), media_type="text/csv")

    # ----------------------------------------------------------------- jobs
    @app.post("/jobs", status_code=201)
    def submit_job(payload: dict):
        dataset_id = payload.get("dataset")
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(422, "unknown dataset")
        op_name = payload.get("op")
        target = payload.get("target", "volume")
        if target not in ("volume", "labels"):
            return _error(422, f"bad target {target!r}")
        try:
            op = get_operator(op_name)
            params = validate_params(op, payload.get("params") or {})
            if op.kind == "map":
                op.profile(params)  # rejects unplannable parameter values
        except ParameterError as exc:
            return _error(422, str(exc))
        job = Job(
            id=uuid.uuid4().hex[:12],
            op=op_name,
            params=params,
            dataset_id=dataset_id,
            target=target,
        )
        try:
            state.queue.put_nowait(job)
        except queue.Full:
            return _error(429, "job queue is full")
        state.jobs[job.id] = job
        state.job_order.append(job.id)
        return {"id": job.id}

    @app.get("/jobs")
    def list_jobs():
        return {"jobs": [state.jobs[j].as_dict() for j in state.job_order]}

    @app.get("/jobs/{job_id}")
    def job_info(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            return _error(404, "unknown job")
        return job.as_dict()

    @app.post("/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            return _error(404, "unknown job")
        if job.state in ("queued", "running"):
            job.cancel_requested = True
            if job.state == "queued":
                job.state = "cancelled"
        # done/failed jobs are left untouched
        return {"state": job.state}

    # ----------------------------------------------------------- annotation
    @app.post("/datasets/{dataset_id}/annotate/{tool}")
    def annotate(dataset_id: str, tool: str, payload: dict):
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(404, "unknown dataset")
        try:
            if tool == "wand":
                plane = _slice_plane(ds, payload)
                mask = annotate_mod.magic_wand(
                    plane,
                    seed=tuple(payload["seed"]),
                    tolerance=float(payload["tolerance"]),
                    connectivity=int(payload.get("connectivity", 4)),
                    axis=payload.get("axis", "z"),
                    index=int(payload.get("index", 0)),
                    label=int(payload.get("label", 1)),
                )
                return mask.to_dict()
            if tool == "lasso":
                axis = payload.get("axis", "z")
                index = int(payload.get("index", 0))
                dims = _slice_dims(ds, axis)
                mask = annotate_mod.lasso_fill(
                    [tuple(v) for v in payload["polygon"]],
                    dims,
                    axis=axis,
                    index=index,
                    label=int(payload.get("label", 1)),
                )
                return mask.to_dict()
            if tool == "snakes":
                plane = _slice_plane(ds, payload)
                init = annotate_mod.RLEMask.from_dict(payload["init"])
                params = annotate_mod.SnakeParams(
                    iterations=int(payload.get("iterations", 50)),
                    smoothing=int(payload.get("smoothing", 1)),
                    balloon=int(payload.get("balloon", 0)),
                    lambda1=float(payload.get("lambda1", 1.0)),
                    lambda2=float(payload.get("lambda2", 1.0)),
                )
                mask = annotate_mod.morph_snakes_acwe(plane, init, params)
                return mask.to_dict()
            if tool == "apply":
                mask = annotate_mod.RLEMask.from_dict(payload["mask"])
                mode = payload.get("mode", "set")
                with ds.lock:
                    ds.snapshot_labels(state.snapshot_keep)
                    annotate_mod.apply_mask(ds.labels.labels, mask, mode)
                return {"applied": mask.pixel_count, "mode": mode}
            return _error(422, f"unknown tool {tool!r}")
        except (KeyError, TypeError, ValueError) as exc:
            return _error(422, f"bad payload: {exc}")
        except ParameterError as exc:
            return _error(422, str(exc))

    @app.post("/datasets/{dataset_id}/labels/undo")
    def undo_labels(dataset_id: str):
        ds = dataset_or_none(dataset_id)
        if ds is None:
            return _error(404, "unknown dataset")
        with ds.lock:
            if not ds.snapshots:
                return _error(422, "no snapshot to restore")
            ds.labels.labels[...] = ds.snapshots.pop()
        return {"ok": True}

    def _slice_plane(ds: Dataset, payload: dict) -> np.ndarray:
        axes = {"z": 0, "y": 1, "x": 2}
        axis = payload.get("axis", "z")
        index = int(payload.get("index", 0))
        if axis not in axes:
            raise ParameterError(f"bad axis {axis!r}")
        ax = axes[axis]
        if not 0 <= index < ds.volume.shape[ax]:
            raise ParameterError(f"slice index {index} out of range")
        return np.take(ds.volume.data, index, axis=ax)

    def _slice_dims(ds: Dataset, axis: str) -> tuple[int, int]:
        axes = {"z": 0, "y": 1, "x": 2}
        if axis not in axes:
            raise ParameterError(f"bad axis {axis!r}")
        shape = [s for i, s in enumerate(ds.volume.shape) if i != axes[axis]]
        return (shape[0], shape[1])

    return app
