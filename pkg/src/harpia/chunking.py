"""Memory-budgeted chunked execution along Z.

Execution model:

1. profile the backend's free memory and reserve a fixed fraction;
2. derive the maximum number of Z-slices per chunk, including halo
   padding required by the operator;
3. process the volume chunk by chunk, writing only chunk interiors, so
   the result is independent of the plan.

The engine reserves the budget's usable bytes on the ledger for the job's
lifetime (memory-pool model); real chunk buffers are carved inside the
reservation and asserted against it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import psutil

from .errors import (
    BudgetTooSmallError,
    BudgetUnavailableError,
    ChunkExecutionError,
    JobCancelled,
    ParameterError,
)
from .ledger import LEDGER


@dataclass(frozen=True)
class MemoryBudget:
    """Backend-reported memory with a reserved share in (0, 1]."""

    total_bytes: int
    fraction: float

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ParameterError(f"budget fraction must be in (0, 1], got {self.fraction}")
        if self.total_bytes <= 0:
            raise ParameterError("budget total must be positive")

    @property
    def usable_bytes(self) -> int:
        return math.floor(self.total_bytes * self.fraction)


DEFAULT_FRACTION = 0.8


def probe_free_bytes() -> int:
    try:
        return int(psutil.virtual_memory().available)
    except Exception as exc:  # pragma: no cover - psutil failure is environmental
        raise BudgetUnavailableError(f"could not query free memory: {exc}") from exc


def profile_budget(free_bytes: Optional[int] = None, fraction: float = DEFAULT_FRACTION) -> MemoryBudget:
    """Budget from an explicit cap or the probed free host RAM."""
    if free_bytes is None:
        free_bytes = probe_free_bytes()
    return MemoryBudget(total_bytes=free_bytes, fraction=fraction)


@dataclass(frozen=True)
class OpProfile:
    """Per-operator resource declaration driving chunk planning.

    halo_z ghost slices on each Z side must be sufficient: a voxel's
    output may depend only on inputs within halo_z Z-distance.
    scratch_factor is the ratio of total working bytes to one chunk's
    input bytes (>= 2: input + output minimum).
    """

    halo_z: int
    scratch_factor: float
    out_dtype: Optional[np.dtype] = None  # None: same as input
    passes: int = 1

    def __post_init__(self):
        if self.halo_z < 0:
            raise ParameterError("halo_z must be >= 0")
        if self.scratch_factor < 2:
            raise ParameterError("scratch_factor must be >= 2 (input + output)")


@dataclass(frozen=True)
class ChunkSpec:
    z_start: int   # interior start (inclusive)
    z_stop: int    # interior stop (exclusive)
    halo_lo: int   # ghost slices below, already truncated at borders
    halo_hi: int

    @property
    def padded_start(self) -> int:
        return self.z_start - self.halo_lo

    @property
    def padded_stop(self) -> int:
        return self.z_stop + self.halo_hi

    @property
    def padded_slices(self) -> int:
        return self.padded_stop - self.padded_start


@dataclass(frozen=True)
class ChunkPlan:
    chunks: tuple[ChunkSpec, ...]
    interior_slices: int          # nominal interior slices per chunk
    slice_bytes: int
    predicted_peak_bytes: int     # ledger reservation for the job
    working_peak_bytes: int       # max per-chunk working-set estimate

    def dump(self) -> str:
        lines = [
            f"chunks={len(self.chunks)} interior_slices={self.interior_slices} "
            f"slice_bytes={self.slice_bytes} predicted_peak={self.predicted_peak_bytes}",
            "idx  interior        padded          halo",
        ]
        for i, c in enumerate(self.chunks):
            lines.append(
                f"{i:<4d} [{c.z_start:>5d},{c.z_stop:>5d})  "
                f"[{c.padded_start:>5d},{c.padded_stop:>5d})  -{c.halo_lo}/+{c.halo_hi}"
            )
        return "\n".join(lines)


def plan_chunks(shape, dtype, profile: OpProfile, budget: MemoryBudget) -> ChunkPlan:
    """Derive halo-padded Z-chunks that fit the budget.

    Total slices per chunk t = floor(usable / (scratch_factor * slice_bytes));
    interior n = t - 2*halo_z.  Border chunk halos are truncated at the
    volume faces, never wrapped.
    """
    z, y, x = shape
    itemsize = np.dtype(dtype).itemsize
    slice_bytes = y * x * itemsize
    usable = budget.usable_bytes
    t = int(usable // (profile.scratch_factor * slice_bytes))
    if t <= 2 * profile.halo_z:
        minimum = math.ceil((2 * profile.halo_z + 1) * profile.scratch_factor * slice_bytes)
        raise BudgetTooSmallError(
            f"budget of {usable} usable bytes holds only {t} padded slices but the "
            f"operator needs more than {2 * profile.halo_z}; minimum usable budget is "
            f"{minimum} bytes",
            minimum_bytes=minimum,
        )
    n = max(t - 2 * profile.halo_z, 1)
    chunks = []
    working_peak = 0
    for start in range(0, z, n):
        stop = min(start + n, z)
        halo_lo = min(profile.halo_z, start)
        halo_hi = min(profile.halo_z, z - stop)
        spec = ChunkSpec(start, stop, halo_lo, halo_hi)
        chunks.append(spec)
        working_peak = max(
            working_peak, math.ceil(spec.padded_slices * slice_bytes * profile.scratch_factor)
        )
    working_peak = min(working_peak, usable)
    return ChunkPlan(
        chunks=tuple(chunks),
        interior_slices=n,
        slice_bytes=slice_bytes,
        predicted_peak_bytes=usable,
        working_peak_bytes=working_peak,
    )


@dataclass
class ExecutionReport:
    chunk_count: int
    chunk_seconds: list[float] = field(default_factory=list)
    peak_bytes: int = 0          # ledger peak above job baseline
    residual_bytes: int = 0      # ledger current - baseline after release
    working_peak_bytes: int = 0  # actual carved buffer high-water mark
    predicted_peak_bytes: int = 0

    @property
    def wall_seconds(self) -> float:
        return float(sum(self.chunk_seconds))


class _Reservation:
    """Job-scoped ledger reservation that inner buffers are carved from."""

    def __init__(self, nbytes: int):
        self.nbytes = nbytes
        self.live = 0
        self.peak = 0

    def __enter__(self):
        LEDGER.charge(self.nbytes)
        return self

    def __exit__(self, *exc):
        LEDGER.release(self.nbytes)
        return False

    def carve(self, nbytes: int) -> None:
        self.live += nbytes
        self.peak = max(self.peak, self.live)

    def free(self, nbytes: int) -> None:
        self.live -= nbytes


def execute_chunked(
    data: np.ndarray,
    fn: Callable[[np.ndarray, dict, dict], np.ndarray],
    profile: OpProfile,
    budget: MemoryBudget,
    params: Optional[dict] = None,
    aux: Optional[dict] = None,
    cancel: Optional[Callable[[], bool]] = None,
    plan: Optional[ChunkPlan] = None,
    fresh_job: bool = True,
) -> tuple[np.ndarray, ExecutionReport]:
    """Run a local operator chunk by chunk, trimming halos.

    ``fn`` receives a contiguous copy of the halo-padded chunk (plus
    matching slabs of any ``aux`` arrays) and must be pure per padded
    chunk.  Only interior slices of its result are written to the output.
    ``fresh_job`` marks a job boundary on the ledger; pass False when the
    call is one pass of a larger job.
    """
    params = params or {}
    aux = aux or {}
    if plan is None:
        plan = plan_chunks(data.shape, data.dtype, profile, budget)
    out_dtype = profile.out_dtype if profile.out_dtype is not None else data.dtype
    if fresh_job:
        LEDGER.job_start()
    report = ExecutionReport(chunk_count=len(plan.chunks), predicted_peak_bytes=plan.predicted_peak_bytes)
    out = np.empty(data.shape, dtype=out_dtype)
    with _Reservation(plan.predicted_peak_bytes) as res:
        for idx, chunk in enumerate(plan.chunks):
            if cancel is not None and cancel():
                raise JobCancelled(f"cancelled before chunk {idx}")
            t0 = time.perf_counter()
            block = np.ascontiguousarray(data[chunk.padded_start : chunk.padded_stop])
            res.carve(block.nbytes)
            aux_blocks = {
                k: np.ascontiguousarray(v[chunk.padded_start : chunk.padded_stop])
                for k, v in aux.items()
            }
            for b in aux_blocks.values():
                res.carve(b.nbytes)
            try:
                result = fn(block, params, aux_blocks)
            except JobCancelled:
                raise
            except Exception as exc:
                raise ChunkExecutionError(
                    f"operator failed on chunk {idx} "
                    f"[{chunk.z_start},{chunk.z_stop}): {exc}",
                    chunk_index=idx,
                ) from exc
            res.carve(result.nbytes)
            interior = result[chunk.halo_lo : chunk.halo_lo + (chunk.z_stop - chunk.z_start)]
            out[chunk.z_start : chunk.z_stop] = interior
            res.free(result.nbytes)
            res.free(block.nbytes)
            for b in aux_blocks.values():
                res.free(b.nbytes)
            del block, result, aux_blocks
            report.chunk_seconds.append(time.perf_counter() - t0)
        report.working_peak_bytes = res.peak
    snap = LEDGER.snapshot()
    report.peak_bytes = snap.peak_bytes - snap.baseline_bytes
    report.residual_bytes = snap.residual_bytes
    return out, report


def chunked_reduce(
    data: np.ndarray,
    reduce_fn: Callable[[np.ndarray, dict], object],
    merge_fn: Callable[[object, object], object],
    budget: MemoryBudget,
    params: Optional[dict] = None,
    profile: Optional[OpProfile] = None,
    cancel: Optional[Callable[[], bool]] = None,
):
    """Pass 1 of a two-pass global operator: fold mergeable summaries.

    ``merge_fn`` must be associative; chunks carry no halo.
    """
    params = params or {}
    if profile is None:
        profile = OpProfile(halo_z=0, scratch_factor=3)
    plan = plan_chunks(data.shape, data.dtype, profile, budget)
    summary = None
    for idx, chunk in enumerate(plan.chunks):
        if cancel is not None and cancel():
            raise JobCancelled(f"cancelled before reduce chunk {idx}")
        block = data[chunk.padded_start : chunk.padded_stop]
        part = reduce_fn(block, params)
        summary = part if summary is None else merge_fn(summary, part)
    return summary


def execute_two_pass(
    data: np.ndarray,
    reduce_fn,
    merge_fn,
    finalize_fn,
    apply_fn,
    budget: MemoryBudget,
    params: Optional[dict] = None,
    apply_profile: Optional[OpProfile] = None,
    cancel: Optional[Callable[[], bool]] = None,
) -> tuple[np.ndarray, ExecutionReport]:
    """Global operator as reduce-over-chunks then chunked apply.

    Pass 1 folds per-chunk summaries with the associative ``merge_fn``;
    ``finalize_fn`` turns the folded summary into a global state that
    pass 2 applies chunk by chunk.
    """
    params = params or {}
    LEDGER.job_start()
    summary = chunked_reduce(data, reduce_fn, merge_fn, budget, params, cancel=cancel)
    state = finalize_fn(summary, params)
    profile = apply_profile or OpProfile(halo_z=0, scratch_factor=3, out_dtype=np.dtype("uint32"))

    def _apply(block, p, _aux):
        return apply_fn(block, state, p)

    return execute_chunked(data, _apply, profile, budget, params, cancel=cancel, fresh_job=False)
