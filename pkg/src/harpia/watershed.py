"""Marker-based 2.5D watershed.

"2.5D" means a 2D priority-flood watershed applied independently per
Z-slice over a shared marker volume.  Flooding is 4-connected in-slice,
ordered by (landscape value ascending, FIFO insertion sequence); seeds
are enqueued in (label, linear index) order.  Every flooded voxel gets a
basin label (no watershed-line voxels).
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import ParameterError
from .volume import LABEL_DTYPE

_NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


def watershed_slice(
    landscape: np.ndarray,
    markers: np.ndarray,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Priority flood of one 2D slice from its nonzero markers."""
    h, w = landscape.shape
    out = markers.astype(LABEL_DTYPE, copy=True)
    if mask is not None:
        out[mask == 0] = 0
    heap: list[tuple[float, int, int, int]] = []
    counter = 0
    seed_rc = np.flatnonzero(out)
    # seeds ordered by (label, linear index)
    order = np.lexsort((seed_rc, out.ravel()[seed_rc]))
    for flat in seed_rc[order]:
        r, c = divmod(int(flat), w)
        heapq.heappush(heap, (float(landscape[r, c]), counter, r, c))
        counter += 1
    while heap:
        _, _, r, c = heapq.heappop(heap)
        label = out[r, c]
        for dr, dc in _NEIGHBORS_4:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            if out[nr, nc] != 0:
                continue
            if mask is not None and mask[nr, nc] == 0:
                continue
            out[nr, nc] = label
            heapq.heappush(heap, (float(landscape[nr, nc]), counter, nr, nc))
            counter += 1
    return out


def watershed_2_5d(
    landscape: np.ndarray,
    markers: np.ndarray,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Per-slice watershed over a volumetric marker set.

    Slices with no markers pass through unlabeled.  Out-of-mask and
    unreachable voxels stay 0.
    """
    if landscape.shape != markers.shape:
        raise ParameterError(
            f"landscape shape {landscape.shape} != markers shape {markers.shape}"
        )
    if mask is not None and mask.shape != landscape.shape:
        raise ParameterError("mask shape must match landscape shape")
    out = np.zeros(landscape.shape, dtype=LABEL_DTYPE)
    for z in range(landscape.shape[0]):
        out[z] = watershed_slice(
            landscape[z], markers[z], None if mask is None else mask[z]
        )
    return out
