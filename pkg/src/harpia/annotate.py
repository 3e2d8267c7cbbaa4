"""Slice-interactive annotation primitives.

All tools are 2D and operate server-side on single slices; results
travel as run-length-encoded masks (the wire format shared with the
browser client).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .volume import LABEL_DTYPE


@dataclass
class RLEMask:
    """Run-length-encoded 2D slice mask.

    Runs are (row, col_start, length), sorted and non-overlapping;
    decode(encode(m)) == m for every mask.
    """

    axis: str
    index: int
    width: int
    height: int
    label: int = 1
    runs: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        prev = (-1, -1)
        for row, start, length in self.runs:
            if not (0 <= row < self.height and 0 <= start and start + length <= self.width):
                raise ParameterError(f"run {(row, start, length)} out of bounds")
            if length < 1:
                raise ParameterError("run length must be >= 1")
            if (row, start) <= prev:
                raise ParameterError("runs must be sorted and non-overlapping")
            prev = (row, start + length)
        self.runs = [tuple(r) for r in self.runs]

    def decode(self) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=bool)
        for row, start, length in self.runs:
            mask[row, start : start + length] = True
        return mask

    @property
    def pixel_count(self) -> int:
        return sum(length for _, _, length in self.runs)

    @classmethod
    def encode(cls, mask: np.ndarray, axis: str = "z", index: int = 0, label: int = 1) -> "RLEMask":
        mask = np.asarray(mask, dtype=bool)
        h, w = mask.shape
        runs = []
        for row in range(h):
            line = mask[row]
            edges = np.flatnonzero(np.diff(np.concatenate([[0], line.view(np.uint8), [0]])))
            for start, stop in zip(edges[::2], edges[1::2]):
                runs.append((row, int(start), int(stop - start)))
        return cls(axis=axis, index=index, width=w, height=h, label=label, runs=runs)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "index": self.index,
            "width": self.width,
            "height": self.height,
            "label": self.label,
            "runs": [list(r) for r in self.runs],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RLEMask":
        try:
            return cls(
                axis=payload["axis"],
                index=int(payload["index"]),
                width=int(payload["width"]),
                height=int(payload["height"]),
                label=int(payload.get("label", 1)),
                runs=[tuple(int(v) for v in r) for r in payload["runs"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed RLE mask payload: {exc}") from exc


def magic_wand(
    slice2d: np.ndarray,
    seed: tuple[int, int],
    tolerance: float,
    connectivity: int = 4,
    axis: str = "z",
    index: int = 0,
    label: int = 1,
) -> RLEMask:
    """Region grow from the seed over |I(p) - I(seed)| <= tolerance."""
    h, w = slice2d.shape
    row, col = seed
    if not (0 <= row < h and 0 <= col < w):
        raise ParameterError(f"seed {seed} out of bounds for {h}x{w} slice")
    if tolerance < 0:
        raise ParameterError("tolerance must be >= 0")
    if connectivity not in (4, 8):
        raise ParameterError(f"connectivity must be 4 or 8, got {connectivity}")
    similar = np.abs(slice2d.astype(np.float64) - float(slice2d[row, col])) <= tolerance
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, _ = ndimage.label(similar, structure=structure)
    region = labels == labels[row, col]
    return RLEMask.encode(region, axis=axis, index=index, label=label)


def lasso_fill(
    polygon: list[tuple[float, float]],
    dims: tuple[int, int],
    axis: str = "z",
    index: int = 0,
    label: int = 1,
) -> RLEMask:
    """Even-odd scanline rasterization at pixel centers.

    Vertices are (row, col) in slice pixel coordinates; the polygon is
    implicitly closed.  A pixel is filled when its integer-coordinate
    center lies inside under the even-odd rule.
    """
    if len(polygon) < 3:
        raise ParameterError("polygon needs at least 3 vertices")
    h, w = dims
    verts = [(float(r), float(c)) for r, c in polygon]
    mask = np.zeros((h, w), dtype=bool)
    edges = list(zip(verts, verts[1:] + verts[:1]))
    cols = np.arange(w)
    for row in range(h):
        crossings = []
        for (r1, c1), (r2, c2) in edges:
            if r1 == r2:
                continue  # horizontal edges never cross a scanline interior
            if (r1 <= row < r2) or (r2 <= row < r1):
                crossings.append(c1 + (row - r1) * (c2 - c1) / (r2 - r1))
        if not crossings:
            continue
        crossings.sort()
        # even-odd parity of crossings at or left of the pixel center
        parity = np.searchsorted(crossings, cols, side="right") % 2
        mask[row] = parity == 1
    return RLEMask.encode(mask, axis=axis, index=index, label=label)


@dataclass(frozen=True)
class SnakeParams:
    iterations: int
    smoothing: int = 1          # sup-inf / inf-sup passes per iteration, 0..4
    balloon: int = 0            # -1 shrink, 0 off, +1 grow
    lambda1: float = 1.0        # inside attachment weight
    lambda2: float = 1.0        # outside attachment weight

    def __post_init__(self):
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if not 0 <= self.smoothing <= 4:
            raise ParameterError("smoothing must be in 0..4")
        if self.balloon not in (-1, 0, 1):
            raise ParameterError("balloon must be -1, 0, or +1")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ParameterError("lambda weights must be positive")


# the 4 line structuring elements used by the curvature operators
_LINES = (
    ((0, -1), (0, 0), (0, 1)),
    ((-1, 0), (0, 0), (1, 0)),
    ((-1, -1), (0, 0), (1, 1)),
    ((-1, 1), (0, 0), (1, -1)),
)


def _line_reduce(u: np.ndarray, reducer) -> list[np.ndarray]:
    padded = np.pad(u, 1, mode="edge")
    h, w = u.shape
    out = []
    for line in _LINES:
        acc = None
        for dy, dx in line:
            view = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
            acc = view if acc is None else reducer(acc, view)
        out.append(acc)
    return out


def _sup_inf(u: np.ndarray) -> np.ndarray:
    return np.maximum.reduce(_line_reduce(u, np.minimum))


def _inf_sup(u: np.ndarray) -> np.ndarray:
    return np.minimum.reduce(_line_reduce(u, np.maximum))


def _dilate_cross(u: np.ndarray) -> np.ndarray:
    padded = np.pad(u, 1, mode="edge")
    h, w = u.shape
    return np.maximum.reduce([
        padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        for dy, dx in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
    ])


def _erode_cross(u: np.ndarray) -> np.ndarray:
    padded = np.pad(u, 1, mode="edge")
    h, w = u.shape
    return np.minimum.reduce([
        padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        for dy, dx in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
    ])


def morph_snakes_acwe(slice2d: np.ndarray, init: RLEMask, params: SnakeParams) -> RLEMask:
    """Morphological active contours without edges (region-based).

    Per iteration: optional balloon dilate/erode with the cross element,
    an attachment step flipping boundary-band pixels by the sign of
    lambda1*(I - c_in)^2 - lambda2*(I - c_out)^2, then alternating
    sup-inf / inf-sup smoothing passes.  Stops early at a fixed point.
    """
    if init.pixel_count == 0:
        raise ParameterError("initial mask must be non-empty")
    image = slice2d.astype(np.float64)
    if image.shape != (init.height, init.width):
        raise ParameterError("initial mask dims must match the slice")
    u = init.decode().astype(np.uint8)
    smooth_counter = 0
    for _ in range(params.iterations):
        before = u.copy()
        if params.balloon == 1:
            u = _dilate_cross(u)
        elif params.balloon == -1:
            u = _erode_cross(u)
        inside = u > 0
        if inside.any() and (~inside).any():
            c_in = image[inside].mean()
            c_out = image[~inside].mean()
            gy, gx = np.gradient(u.astype(np.float64))
            band = (np.abs(gy) + np.abs(gx)) > 0
            force = params.lambda1 * (image - c_in) ** 2 - params.lambda2 * (image - c_out) ** 2
            u = u.copy()
            u[band & (force < 0)] = 1
            u[band & (force > 0)] = 0
        for _ in range(params.smoothing):
            if smooth_counter % 2 == 0:
                u = _inf_sup(_sup_inf(u))
            else:
                u = _sup_inf(_inf_sup(u))
            smooth_counter += 1
        if np.array_equal(u, before):
            break
    return RLEMask.encode(
        u > 0, axis=init.axis, index=init.index, label=init.label
    )


def apply_mask(labels: np.ndarray, mask: RLEMask, mode: str = "set") -> np.ndarray:
    """Commit an RLE mask into a label volume slice.

    ``set`` writes the mask's label id on its pixels; ``erase`` writes 0;
    all other voxels are untouched.  Returns the mutated array.
    """
    if mode not in ("set", "erase"):
        raise ParameterError(f"mode must be set or erase, got {mode!r}")
    axes = {"z": 0, "y": 1, "x": 2}
    if mask.axis not in axes:
        raise ParameterError(f"unknown slice axis {mask.axis!r}")
    ax = axes[mask.axis]
    if not 0 <= mask.index < labels.shape[ax]:
        raise ParameterError(f"slice index {mask.index} out of range")
    plane = np.take(labels, mask.index, axis=ax)
    if plane.shape != (mask.height, mask.width):
        raise ParameterError("mask dims do not match the slice")
    value = LABEL_DTYPE.type(mask.label if mode == "set" else 0)
    decoded = mask.decode()
    idx = [slice(None)] * 3
    idx[ax] = mask.index
    region = labels[tuple(idx)]
    region[decoded] = value
    return labels
