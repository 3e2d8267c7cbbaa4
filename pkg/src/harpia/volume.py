"""Volume and label data model plus raw-binary file I/O.

Native storage is raw little-endian row-major binary (x fastest) with a
``.vol.meta`` structured-text sidecar.  Supported element types are uint8,
uint16, and float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CorruptInputError, ParameterError, UnsupportedFormatError
from .ledger import LEDGER

SUPPORTED_DTYPES = {
    "uint8": np.dtype("uint8"),
    "uint16": np.dtype("uint16"),
    "float32": np.dtype("float32"),
}

LABEL_DTYPE = np.dtype("uint32")

_AXES = {"z": 0, "y": 1, "x": 2}


@dataclass
class VolumeMeta:
    """Sidecar contents; round-trips losslessly through the text format."""

    dtype: str
    shape: tuple[int, int, int]          # (z, y, x)
    spacing: tuple[float, float, float]  # (sz, sy, sx)
    byte_order: str = "little"
    offset_bytes: int = 0
    description: str = ""

    def to_text(self) -> str:
        lines = [
            f"dtype: {self.dtype}",
            f"shape: {self.shape[0]} {self.shape[1]} {self.shape[2]}",
            f"spacing: {self.spacing[0]!r} {self.spacing[1]!r} {self.spacing[2]!r}",
            f"byte_order: {self.byte_order}",
            f"offset_bytes: {self.offset_bytes}",
            f"description: {self.description}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VolumeMeta":
        fields = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
        try:
            dtype = fields["dtype"]
            shape = tuple(int(v) for v in fields["shape"].split())
            spacing = tuple(float(v) for v in fields["spacing"].split())
        except (KeyError, ValueError) as exc:
            raise UnsupportedFormatError(f"malformed sidecar: {exc}") from exc
        if dtype not in SUPPORTED_DTYPES:
            raise UnsupportedFormatError(f"unsupported dtype {dtype!r}")
        if len(shape) != 3 or len(spacing) != 3:
            raise UnsupportedFormatError("shape and spacing must have 3 components")
        return cls(
            dtype=dtype,
            shape=shape,  # type: ignore[arg-type]
            spacing=spacing,  # type: ignore[arg-type]
            byte_order=fields.get("byte_order", "little"),
            offset_bytes=int(fields.get("offset_bytes", "0")),
            description=fields.get("description", ""),
        )


def _check_spacing(spacing):
    if len(spacing) != 3 or any(s <= 0 for s in spacing):
        raise ParameterError(f"spacing components must be strictly positive, got {spacing}")


@dataclass
class Volume:
    """Dense 3D scalar grid in (Z, Y, X) order.

    Immutable by convention once constructed; conversions produce new
    volumes.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    description: str = ""

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ParameterError(f"volume data must be 3D, got ndim={self.data.ndim}")
        if str(self.data.dtype) not in SUPPORTED_DTYPES:
            raise UnsupportedFormatError(f"unsupported dtype {self.data.dtype}")
        _check_spacing(self.spacing)
        self.spacing = tuple(float(s) for s in self.spacing)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    def meta(self) -> VolumeMeta:
        return VolumeMeta(
            dtype=str(self.dtype),
            shape=self.shape,
            spacing=self.spacing,
            description=self.description,
        )

    def with_data(self, data: np.ndarray) -> "Volume":
        return replace(self, data=data)


@dataclass
class LabelVolume:
    """Dense 3D uint32 label grid; label 0 is reserved for "unlabeled"."""

    labels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    palette: dict[int, tuple[int, int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.labels.ndim != 3:
            raise ParameterError("label data must be 3D")
        if self.labels.dtype != LABEL_DTYPE:
            self.labels = self.labels.astype(LABEL_DTYPE)
        _check_spacing(self.spacing)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    @property
    def nbytes(self) -> int:
        return self.labels.nbytes

    @classmethod
    def empty_like(cls, volume: Volume) -> "LabelVolume":
        return cls(np.zeros(volume.shape, dtype=LABEL_DTYPE), spacing=volume.spacing)


def default_meta_path(data_path) -> str:
    return str(data_path) + ".meta"


def load_volume(data_path, meta_path=None) -> Volume:
    """Load a raw ``.vol`` file described by its sidecar.

    The loaded buffer is charged to the process ledger.
    """
    if meta_path is None:
        meta_path = default_meta_path(data_path)
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = VolumeMeta.from_text(fh.read())
    dtype = SUPPORTED_DTYPES[meta.dtype]
    nvox = meta.shape[0] * meta.shape[1] * meta.shape[2]
    expected = meta.offset_bytes + nvox * dtype.itemsize
    import os

    actual = os.path.getsize(data_path)
    if actual != expected:
        raise CorruptInputError(
            f"{data_path}: file is {actual} bytes, sidecar implies {expected} "
            f"(offset {meta.offset_bytes} + {nvox} x {dtype.itemsize})"
        )
    with open(data_path, "rb") as fh:
        fh.seek(meta.offset_bytes)
        buf = fh.read(nvox * dtype.itemsize)
    data = np.frombuffer(buf, dtype=dtype.newbyteorder("<")).astype(dtype, copy=False)
    data = data.reshape(meta.shape)
    LEDGER.charge(data.nbytes)
    return Volume(data=data, spacing=meta.spacing, description=meta.description)


def save_volume(volume: Volume, data_path, meta_path=None) -> None:
    """Write the raw buffer plus sidecar; ``load_volume`` inverts it."""
    if meta_path is None:
        meta_path = default_meta_path(data_path)
    try:
        with open(data_path, "wb") as fh:
            fh.write(np.ascontiguousarray(volume.data).astype(volume.dtype.newbyteorder("<")).tobytes())
        with open(meta_path, "w", encoding="utf-8") as fh:
            fh.write(volume.meta().to_text())
    except OSError as exc:
        raise OSError(f"failed writing volume to {data_path}: {exc}") from exc


def release_volume(volume: Volume) -> None:
    """Discharge a loaded volume's buffer from the ledger."""
    LEDGER.release(volume.nbytes)


def read_slice(volume: Volume, axis: str, index: int, window: tuple[float, float]) -> np.ndarray:
    """Extract one plane as an 8-bit image under a display window.

    Output pixel = clamp(round(255 * (v - low) / (high - low)), 0, 255);
    output dims are the two remaining axes in (slower, faster) order.
    """
    if axis not in _AXES:
        raise ParameterError(f"axis must be one of z/y/x, got {axis!r}")
    low, high = window
    if not low < high:
        raise ParameterError(f"window low must be < high, got {window}")
    ax = _AXES[axis]
    if not 0 <= index < volume.shape[ax]:
        raise IndexError(f"slice index {index} out of range for axis {axis} (size {volume.shape[ax]})")
    plane = np.take(volume.data, index, axis=ax).astype(np.float64)
    scaled = np.rint(255.0 * (plane - low) / (high - low))
    return np.clip(scaled, 0, 255).astype(np.uint8)


def default_window(volume: Volume) -> tuple[float, float]:
    """Cheap auto-contrast: (min, max) of a 1%-stride subsample."""
    flat = volume.data.ravel()
    sample = flat[::100] if flat.size >= 100 else flat
    lo = float(sample.min())
    hi = float(sample.max())
    if lo == hi:
        hi = lo + 1.0
    return lo, hi


def crop_z(volume: Volume, z_start: int, z_stop: int) -> Volume:
    """Z-subvolume with inherited spacing and metadata."""
    if not 0 <= z_start < z_stop <= volume.shape[0]:
        raise ParameterError(f"invalid z range [{z_start}, {z_stop}) for Z={volume.shape[0]}")
    return Volume(
        data=volume.data[z_start:z_stop].copy(),
        spacing=volume.spacing,
        description=volume.description,
    )
