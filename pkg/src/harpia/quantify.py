"""Quantification: connected components, exact EDT, per-label metrics.

Connected-components labeling is deterministic (labels compacted to
1..count in first-voxel scan order) and supports chunked execution by
merging boundary-slice equivalences through a union-find pass.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .chunking import MemoryBudget, OpProfile, plan_chunks
from .errors import ParameterError
from .ledger import LEDGER
from .morphology import _structure
from .volume import LABEL_DTYPE


class DisjointSet:
    """Array-backed union-find with path halving; smaller root wins."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return int(x)

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb


def _compact_by_scan_order(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel nonzero ids to 1..count ordered by first occurrence."""
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    nz = ids != 0
    ids, first = ids[nz], first[nz]
    order = np.argsort(first)
    mapping = np.zeros(int(labels.max()) + 1, dtype=LABEL_DTYPE)
    mapping[ids[order]] = np.arange(1, len(ids) + 1, dtype=LABEL_DTYPE)
    return mapping[labels], len(ids)


def connected_components(
    mask: np.ndarray,
    connectivity: int = 6,
    budget: MemoryBudget | None = None,
) -> tuple[np.ndarray, int]:
    """Label a binary mask; returns (labels 1..count, count).

    With a budget, chunks are labeled locally and boundary-slice
    equivalences are merged with a union-find before the global relabel.
    """
    structure = _structure(connectivity)
    binary = np.asarray(mask) != 0
    if budget is None:
        local, _ = ndimage.label(binary, structure=structure)
        return _compact_by_scan_order(local.astype(LABEL_DTYPE))

    plan = plan_chunks(binary.shape, np.dtype("uint8"), OpProfile(halo_z=0, scratch_factor=6), budget)
    labels = np.zeros(binary.shape, dtype=np.int64)
    offset = 0
    for chunk in plan.chunks:
        block = binary[chunk.z_start : chunk.z_stop]
        local, n = ndimage.label(block, structure=structure)
        local = local.astype(np.int64)
        local[local > 0] += offset
        labels[chunk.z_start : chunk.z_stop] = local
        offset += n

    dsu = DisjointSet(offset + 1)
    for chunk in plan.chunks[1:]:
        z = chunk.z_start
        below, above = labels[z - 1], labels[z]
        shifts = [(0, 0)] if connectivity == 6 else [
            (dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
        ]
        h, w = below.shape
        for dy, dx in shifts:
            y0, y1 = max(0, dy), min(h, h + dy)
            x0, x1 = max(0, dx), min(w, w + dx)
            a = below[y0:y1, x0:x1]
            b = above[y0 - dy : y1 - dy, x0 - dx : x1 - dx]
            touching = (a > 0) & (b > 0)
            if touching.any():
                pairs = np.unique(
                    np.stack([a[touching], b[touching]], axis=1), axis=0
                )
                for pa, pb in pairs:
                    dsu.union(int(pa), int(pb))

    roots = np.array([dsu.find(i) for i in range(offset + 1)], dtype=np.int64)
    roots[0] = 0
    merged = roots[labels]
    return _compact_by_scan_order(merged.astype(LABEL_DTYPE))


EDT_INF = np.inf  # sentinel for volumes with no background voxel


def _edt_1d(f: np.ndarray, step: float) -> np.ndarray:
    """Exact lower-envelope pass of Felzenszwalb & Huttenlocher.

    ``f`` holds squared distances; ``step`` is the physical sample
    spacing along the scanned axis.
    """
    n = f.size
    d = np.empty(n)
    v = np.zeros(n, dtype=np.int64)   # parabola sites
    zb = np.empty(n + 1)              # envelope boundaries
    zb[0] = -math.inf
    zb[1] = math.inf
    k = 0
    w2 = step * step
    for q in range(1, n):
        if f[q] == math.inf:
            continue
        while True:
            p = v[k]
            if f[p] == math.inf:
                s = -math.inf
            else:
                s = ((f[q] + w2 * q * q) - (f[p] + w2 * p * p)) / (2.0 * w2 * (q - p))
            if s <= zb[k]:
                k -= 1
                if k < 0:
                    k = 0
                    v[0] = q
                    zb[0] = -math.inf
                    zb[1] = math.inf
                    break
                continue
            k += 1
            v[k] = q
            zb[k] = s
            zb[k + 1] = math.inf
            break
    k = 0
    out = np.empty(n)
    for q in range(n):
        while zb[k + 1] < q:
            k += 1
        p = v[k]
        out[q] = f[p] + w2 * (q - p) ** 2 if f[p] != math.inf else math.inf
    return out


def edt(mask: np.ndarray, spacing=(1.0, 1.0, 1.0), squared: bool = False) -> np.ndarray:
    """Exact Euclidean distance to the nearest background voxel.

    Anisotropic spacing is folded into the per-axis scans.  A volume
    with no background yields +inf on every voxel (documented sentinel).
    """
    binary = np.asarray(mask) != 0
    dist2 = np.where(binary, np.inf, 0.0)
    for axis, step in enumerate(spacing):
        moved = np.moveaxis(dist2, axis, -1)
        flat = moved.reshape(-1, moved.shape[-1])
        for i in range(flat.shape[0]):
            line = flat[i]
            if line.max() != 0:  # all-background lines are already exact
                flat[i] = _edt_1d(line, float(step))
        dist2 = np.moveaxis(flat.reshape(moved.shape), -1, axis)
    if squared:
        return dist2
    return np.sqrt(dist2, dtype=np.float64).astype(np.float32)


@dataclass(frozen=True)
class LabelMetricsRow:
    label: int
    voxels: int
    volume: float       # physical units^3
    area: float         # exposed-face surface area, units^2
    perimeter: float    # per-Z-slice exposed-edge length summed, units
    fraction: float

    def as_tuple(self):
        return (self.label, self.voxels, self.volume, self.area, self.perimeter, self.fraction)


METRICS_CSV_HEADER = ("label", "voxels", "volume", "area", "perimeter", "fraction")


def label_metrics(labels: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> list[LabelMetricsRow]:
    """Per-label voxel count, volume, surface area, perimeter, fraction.

    Surface area counts faces between a label voxel and any
    different-label voxel or the volume border, weighted by physical
    face area (a voxelization-biased estimator).  Perimeter counts
    in-slice exposed edges per Z-slice.
    """
    labels = np.asarray(labels)
    sz, sy, sx = (float(s) for s in spacing)
    total = labels.size
    max_label = int(labels.max()) if total else 0
    counts = np.bincount(labels.ravel().astype(np.int64), minlength=max_label + 1)

    face_area = {0: sy * sx, 1: sz * sx, 2: sz * sy}
    area = np.zeros(max_label + 1)
    for axis in range(3):
        pad = [(0, 0)] * 3
        pad[axis] = (1, 1)
        # pad with -1 so volume borders always count as exposed
        padded = np.pad(labels.astype(np.int64), pad, constant_values=-1)
        n = labels.shape[axis]
        for side in (0, 2):
            idx = [slice(None)] * 3
            idx[axis] = slice(side, side + n)
            neighbor = padded[tuple(idx)]
            exposed = (labels != 0) & (neighbor != labels)
            if exposed.any():
                area += face_area[axis] * np.bincount(
                    labels[exposed].ravel().astype(np.int64), minlength=max_label + 1
                )

    edge_len = {1: sx, 2: sy}  # edge perpendicular to y runs along x and vice versa
    perimeter = np.zeros(max_label + 1)
    for axis in (1, 2):
        pad = [(0, 0)] * 3
        pad[axis] = (1, 1)
        padded = np.pad(labels.astype(np.int64), pad, constant_values=-1)
        n = labels.shape[axis]
        for side in (0, 2):
            idx = [slice(None)] * 3
            idx[axis] = slice(side, side + n)
            neighbor = padded[tuple(idx)]
            exposed = (labels != 0) & (neighbor != labels)
            if exposed.any():
                perimeter += edge_len[axis] * np.bincount(
                    labels[exposed].ravel().astype(np.int64), minlength=max_label + 1
                )

    voxel_volume = sz * sy * sx
    rows = []
    for label_id in range(max_label + 1):
        c = int(counts[label_id])
        if c == 0:
            continue
        rows.append(
            LabelMetricsRow(
                label=label_id,
                voxels=c,
                volume=c * voxel_volume,
                area=float(area[label_id]),
                perimeter=float(perimeter[label_id]),
                fraction=c / total,
            )
        )
    return rows


def metrics_to_csv(rows: list[LabelMetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(METRICS_CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_tuple())
    return buf.getvalue()
