"""Morphological label-editing suite.

Flat structuring elements only; window min/max with clamp-to-edge
borders, which for the coordinate-convex factory shapes (box, ball,
cross) coincides with clipping the element at the volume faces, so the
usual algebraic identities (duality, idempotence, extensivity) hold
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .volume import LABEL_DTYPE

MORPH_OPS = ("erode", "dilate", "open", "close")


@dataclass(frozen=True)
class StructuringElement:
    """Set of integer (dz, dy, dx) displacements containing the origin."""

    offsets: tuple[tuple[int, int, int], ...]
    name: str = "custom"

    def __post_init__(self):
        if not self.offsets:
            raise ParameterError("structuring element must not be empty")
        if (0, 0, 0) not in self.offsets:
            raise ParameterError("structuring element must contain the origin")

    @property
    def z_extent(self) -> int:
        return max(abs(o[0]) for o in self.offsets)

    @property
    def extent(self) -> tuple[int, int, int]:
        return tuple(max(abs(o[a]) for o in self.offsets) for a in range(3))

    def reflect(self) -> "StructuringElement":
        return StructuringElement(
            tuple(sorted((-z, -y, -x) for z, y, x in self.offsets)), name=self.name
        )

    @classmethod
    def box(cls, r: int) -> "StructuringElement":
        _check_radius(r)
        offs = [
            (dz, dy, dx)
            for dz in range(-r, r + 1)
            for dy in range(-r, r + 1)
            for dx in range(-r, r + 1)
        ]
        return cls(tuple(offs), name=f"box:{r}")

    @classmethod
    def ball(cls, r: int) -> "StructuringElement":
        # Euclidean norm in voxel units, not physical spacing
        _check_radius(r)
        offs = [
            (dz, dy, dx)
            for dz in range(-r, r + 1)
            for dy in range(-r, r + 1)
            for dx in range(-r, r + 1)
            if dz * dz + dy * dy + dx * dx <= r * r
        ]
        return cls(tuple(offs), name=f"ball:{r}")

    @classmethod
    def cross(cls, r: int) -> "StructuringElement":
        _check_radius(r)
        offs = {(0, 0, 0)}
        for a in range(3):
            for d in range(-r, r + 1):
                o = [0, 0, 0]
                o[a] = d
                offs.add(tuple(o))
        return cls(tuple(sorted(offs)), name=f"cross:{r}")

    @classmethod
    def parse(cls, spec: str) -> "StructuringElement":
        """Parse 'ball:2' / 'box:1' / 'cross:1' CLI notation."""
        kind, _, r = spec.partition(":")
        factories = {"box": cls.box, "ball": cls.ball, "cross": cls.cross}
        if kind not in factories:
            raise ParameterError(f"unknown structuring element {spec!r}")
        try:
            radius = int(r)
        except ValueError:
            raise ParameterError(f"bad structuring element radius in {spec!r}") from None
        return factories[kind](radius)


def _check_radius(r):
    if r < 1:
        raise ParameterError(f"structuring element radius must be >= 1, got {r}")


def _window_reduce(data: np.ndarray, se: StructuringElement, op) -> np.ndarray:
    ez, ey, ex = se.extent
    padded = np.pad(data, ((ez, ez), (ey, ey), (ex, ex)), mode="edge")
    z, y, x = data.shape
    out = None
    for dz, dy, dx in se.offsets:
        view = padded[ez + dz : ez + dz + z, ey + dy : ey + dy + y, ex + dx : ex + dx + x]
        out = view.copy() if out is None else op(out, view)
    return out


def erode(data: np.ndarray, se: StructuringElement) -> np.ndarray:
    """(I erode B)(p) = min over b in B of I(p + b)."""
    return _window_reduce(data, se, np.minimum)


def dilate(data: np.ndarray, se: StructuringElement) -> np.ndarray:
    """(I dilate B)(p) = max over b in B of I(p - b)."""
    return _window_reduce(data, se.reflect(), np.maximum)


def morph(data: np.ndarray, op: str, se: StructuringElement, iterations: int = 1) -> np.ndarray:
    """erode/dilate/open/close; open = dilate(erode(I)), close = erode(dilate(I))."""
    if op not in MORPH_OPS:
        raise ParameterError(f"op must be one of {MORPH_OPS}, got {op!r}")
    if iterations < 1:
        raise ParameterError(f"iterations must be >= 1, got {iterations}")
    out = data
    for _ in range(iterations):
        if op == "erode":
            out = erode(out, se)
        elif op == "dilate":
            out = dilate(out, se)
        elif op == "open":
            out = dilate(erode(out, se), se)
        else:
            out = erode(dilate(out, se), se)
    return out


def geodesic_reconstruct(marker: np.ndarray, mask: np.ndarray, kind: str = "dilation") -> np.ndarray:
    """Reconstruction by iterated geodesic steps until fixed point.

    dilation kind: marker <= mask pointwise, step = min(dilate(m, cross(1)), mask);
    erosion kind: marker >= mask, step = max(erode(m, cross(1)), mask).
    """
    if kind not in ("dilation", "erosion"):
        raise ParameterError(f"kind must be dilation or erosion, got {kind!r}")
    se = StructuringElement.cross(1)
    if kind == "dilation":
        if np.any(marker > mask):
            raise ParameterError("reconstruction by dilation requires marker <= mask")
        step = lambda m: np.minimum(dilate(m, se), mask)
    else:
        if np.any(marker < mask):
            raise ParameterError("reconstruction by erosion requires marker >= mask")
        step = lambda m: np.maximum(erode(m, se), mask)
    current = np.asarray(marker).copy()
    while True:
        nxt = step(current)
        if np.array_equal(nxt, current):
            return nxt
        current = nxt


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 6:
        return ndimage.generate_binary_structure(3, 1)
    if connectivity == 26:
        return ndimage.generate_binary_structure(3, 3)
    raise ParameterError(f"connectivity must be 6 or 26, got {connectivity}")


def fill_holes(mask: np.ndarray, connectivity: int = 6) -> np.ndarray:
    """Fill background components not connected to the volume border."""
    structure = _structure(connectivity)
    background = mask == 0
    labels, _count = ndimage.label(background, structure=structure)
    border = np.zeros(mask.shape, dtype=bool)
    for axis in range(3):
        idx = [slice(None)] * 3
        idx[axis] = 0
        border[tuple(idx)] = True
        idx[axis] = -1
        border[tuple(idx)] = True
    border_labels = np.unique(labels[border & background])
    keep = np.zeros(labels.max() + 1, dtype=bool)
    keep[border_labels] = True
    holes = background & ~keep[labels]
    out = np.asarray(mask).copy()
    out[holes] = 1
    return out


def smooth_labels(labels: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Per-label binary open-then-close; contested voxels go to the
    smallest label id, abandoned voxels fall back to 0."""
    out = np.zeros(labels.shape, dtype=labels.dtype)
    ids = [int(v) for v in np.unique(labels) if v != 0]
    for label_id in ids:  # ascending: smallest id claims contested voxels
        mask = (labels == label_id).astype(np.uint8)
        smoothed = morph(morph(mask, "open", se), "close", se)
        out[(out == 0) & (smoothed > 0)] = label_id
    return out


def remove_islands(data: np.ndarray, min_size: int, connectivity: int = 6) -> np.ndarray:
    """Zero out connected components smaller than min_size voxels.

    Binary masks are processed directly; label volumes are processed per
    label id so touching regions with different ids stay separate.
    """
    if min_size < 1:
        raise ParameterError(f"min_size must be >= 1, got {min_size}")
    structure = _structure(connectivity)
    out = np.asarray(data).copy()
    ids = [int(v) for v in np.unique(data) if v != 0]
    for label_id in ids:
        mask = data == label_id
        cc, count = ndimage.label(mask, structure=structure)
        if count == 0:
            continue
        sizes = np.bincount(cc.ravel(), minlength=count + 1)
        small = np.flatnonzero(sizes < min_size)
        small = small[small != 0]
        if small.size:
            out[np.isin(cc, small)] = 0
    return out
