"""Benchmark harness: repeated timed runs over a ladder of dataset sizes,
reporting mean/std execution time plus peak and residual tracked memory.

Synthetic volumes are seeded pseudo-random so runs are reproducible.
Timing covers the chunk loop only unless ``include_io`` is set.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chunking import MemoryBudget
from .errors import ParameterError
from .ledger import LEDGER
from .registry import run_operator
from .volume import Volume, load_volume

CSV_HEADER = ("size_bytes", "mean_s", "std_s", "peak_bytes", "residual_bytes")

DEFAULT_REPEATS = 30


@dataclass
class BenchScenario:
    op: str
    params: dict = field(default_factory=dict)
    ladder: tuple[int, ...] = (64, 128, 192, 256)  # Z-slice counts
    base_yx: int = 64
    repeats: int = DEFAULT_REPEATS
    budget_bytes: int = 256 * 1024 * 1024
    fraction: float = 1.0
    seed: int = 0
    dtype: str = "uint8"
    warm: bool = False
    include_io: bool = False
    input_path: str | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ParameterError("repeats must be >= 1")
        if list(self.ladder) != sorted(set(self.ladder)) or len(self.ladder) < 1:
            raise ParameterError("size ladder must be strictly increasing")


@dataclass(frozen=True)
class BenchRow:
    size_bytes: int
    mean_s: float
    std_s: float
    peak_bytes: int
    residual_bytes: int

    def as_tuple(self):
        return (self.size_bytes, self.mean_s, self.std_s, self.peak_bytes, self.residual_bytes)


def synthesize(z: int, yx: int, dtype: str, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if dtype == "float32":
        return rng.random((z, yx, yx), dtype=np.float32)
    info = np.iinfo(dtype)
    return rng.integers(info.min, info.max + 1, size=(z, yx, yx), dtype=dtype)


def run_bench(scenario: BenchScenario) -> list[BenchRow]:
    budget = MemoryBudget(scenario.budget_bytes, scenario.fraction)
    rows = []
    source = None
    if scenario.input_path is not None:
        source = load_volume(scenario.input_path)
    for z in scenario.ladder:
        if source is not None:
            if z > source.shape[0]:
                raise ParameterError(
                    f"ladder entry {z} exceeds input Z={source.shape[0]}"
                )
            base = source.data[:z]
        else:
            base = synthesize(z, scenario.base_yx, scenario.dtype, scenario.seed)
        times = []
        peak = 0
        residual = 0
        warm_input = np.ascontiguousarray(base)
        for _ in range(scenario.repeats):
            # cold runs hand the operator a fresh buffer every repeat
            data = warm_input if scenario.warm else base.copy()
            t0 = time.perf_counter()
            _, report = run_operator(data, scenario.op, scenario.params, budget)
            total = time.perf_counter() - t0
            # global ops report no per-chunk times; fall back to the full wall time
            elapsed = total if scenario.include_io else (report.wall_seconds or total)
            times.append(elapsed)
            peak = max(peak, report.peak_bytes)
            residual = report.residual_bytes
        rows.append(
            BenchRow(
                size_bytes=base.nbytes,
                mean_s=statistics.fmean(times),
                std_s=statistics.stdev(times) if len(times) > 1 else 0.0,
                peak_bytes=peak,
                residual_bytes=residual,
            )
        )
    return rows


def write_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_tuple())
