"""Global Otsu and local adaptive thresholds producing binary labels.

Foreground convention is strictly-greater (v > T).  Niblack/Sauvola use
the population standard deviation over the clamped window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d, median_filter

from .chunking import MemoryBudget, OpProfile, chunked_reduce, execute_chunked
from .errors import HarpiaError, ParameterError
from .filters import _box_sum
from .volume import LABEL_DTYPE

DEFAULT_BINS = 256

LOCAL_KINDS = ("mean", "median", "gaussian", "niblack", "sauvola")


@dataclass(frozen=True)
class Histogram:
    """Fixed-range counts; mergeable by elementwise addition."""

    lo: float
    hi: float
    counts: np.ndarray  # int64

    @property
    def bin_count(self) -> int:
        return self.counts.size

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.bin_count

    def merge(self, other: "Histogram") -> "Histogram":
        if (self.lo, self.hi, self.bin_count) != (other.lo, other.hi, other.bin_count):
            raise ParameterError("histograms with different binning cannot merge")
        return Histogram(self.lo, self.hi, self.counts + other.counts)


def histogram_range(data: np.ndarray) -> tuple[float, float]:
    """Bin range: full dtype range for integers, (min, max) for floats."""
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        return float(info.min), float(info.max) + 1.0
    lo = float(data.min())
    hi = float(data.max())
    if lo == hi:
        hi = lo + 1.0
    return lo, hi


def compute_histogram(data: np.ndarray, bins: int = DEFAULT_BINS, rng=None) -> Histogram:
    if rng is None:
        rng = histogram_range(data)
    counts, _ = np.histogram(data, bins=bins, range=rng)
    return Histogram(rng[0], rng[1], counts.astype(np.int64))


def otsu_from_histogram(hist: Histogram) -> float:
    """Bin-edge threshold maximizing between-class variance.

    Maximizes sigma_b^2(t) = w0*w1*(mu0 - mu1)^2 over splits; ties break
    toward the smallest threshold.  Returns the left edge of the highest
    background bin (exact for integer data binned at unit width).
    """
    counts = hist.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise HarpiaError("empty histogram")
    idx = np.arange(hist.bin_count, dtype=np.float64)
    w0 = np.cumsum(counts)
    m0 = np.cumsum(counts * idx)
    w1 = total - w0
    m1 = m0[-1] - m0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        raise HarpiaError("degenerate histogram: all voxels share one bin")
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(valid, w0 * w1 * (m0 / w0 - m1 / w1) ** 2, -np.inf)
    split = int(np.argmax(sigma_b))  # argmax takes the first (smallest) tie
    return hist.lo + split * hist.bin_width


def otsu(data: np.ndarray, bins: int = DEFAULT_BINS, budget: MemoryBudget | None = None) -> float:
    """Global Otsu threshold; chunked two-pass histogram when budgeted."""
    if budget is None:
        hist = compute_histogram(data, bins)
    else:
        if np.issubdtype(data.dtype, np.integer):
            rng = histogram_range(data)
        else:
            lo = chunked_reduce(data, lambda b, _p: float(b.min()), min, budget)
            hi = chunked_reduce(data, lambda b, _p: float(b.max()), max, budget)
            rng = (lo, hi if hi > lo else lo + 1.0)
        hist = chunked_reduce(
            data,
            lambda b, _p: compute_histogram(b, bins, rng),
            Histogram.merge,
            budget,
        )
    return otsu_from_histogram(hist)


def apply_threshold(data: np.ndarray, t: float) -> np.ndarray:
    """Binary labels: foreground (1) where v > t."""
    return (data > t).astype(LABEL_DTYPE)


def otsu_binarize(
    data: np.ndarray, bins: int = DEFAULT_BINS, budget: MemoryBudget | None = None,
    cancel=None,
):
    """Threshold with Otsu and binarize; honors chunking when budgeted."""
    t = otsu(data, bins, budget)
    if budget is None:
        return apply_threshold(data, t), t
    out, _report = execute_chunked(
        data,
        lambda b, _p, _a: apply_threshold(b, t),
        OpProfile(halo_z=0, scratch_factor=6, out_dtype=LABEL_DTYPE),
        budget,
        cancel=cancel,
        fresh_job=False,
    )
    return out, t


def _window_mean_var(data: np.ndarray, w: int):
    """Population mean and variance over the clamped (2w+1)^3 window."""
    padded = np.pad(data, w, mode="edge")
    n = (2 * w + 1) ** 3
    s1 = _box_sum(padded, w).astype(np.float64)
    if np.issubdtype(data.dtype, np.integer):
        sq = padded.astype(np.int64) ** 2
    else:
        sq = padded.astype(np.float64) ** 2
    s2 = _box_sum_precast(sq, w).astype(np.float64)
    m = s1 / n
    var = np.maximum(s2 / n - m * m, 0.0)
    return m, var


def _box_sum_precast(arr: np.ndarray, radius: int) -> np.ndarray:
    # identical sliding-sum pass but without re-casting the accumulator
    acc = arr
    w = 2 * radius + 1
    for axis in range(3):
        c = np.cumsum(acc, axis=axis)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        n = acc.shape[axis]
        hi = [slice(None)] * 3
        lo = [slice(None)] * 3
        hi[axis] = slice(w, n + 1)
        lo[axis] = slice(0, n + 1 - w)
        acc = c[tuple(hi)] - c[tuple(lo)]
    return acc


def default_sauvola_r(dtype) -> float:
    """Half the dtype range (127.5 for uint8); 0.5 for float data."""
    if np.issubdtype(np.dtype(dtype), np.integer):
        info = np.iinfo(dtype)
        return (info.max - info.min) / 2.0
    return 0.5


def local_threshold(
    data: np.ndarray,
    kind: str,
    window: int,
    k: float = 0.2,
    r: float | None = None,
    c: float = 0.0,
) -> np.ndarray:
    """Adaptive binarization with a per-voxel threshold T.

    mean: T = m - c; median: T = med - c; gaussian: T = gaussian-weighted
    mean (sigma = w/2) - c; niblack: T = m + k*s; sauvola:
    T = m * (1 + k*(s/R - 1)); s is the population std-dev.
    """
    if kind not in LOCAL_KINDS:
        raise ParameterError(f"kind must be one of {LOCAL_KINDS}, got {kind!r}")
    if window < 1:
        raise ParameterError(f"window radius must be >= 1, got {window}")
    w = int(window)
    if kind == "mean":
        m, _ = _window_mean_var(data, w)
        t = m - c
    elif kind == "median":
        t = median_filter(data, size=2 * w + 1, mode="nearest").astype(np.float64) - c
    elif kind == "gaussian":
        sigma = w / 2.0
        x = np.arange(-w, w + 1, dtype=np.float64)
        kern = np.exp(-0.5 * (x / sigma) ** 2)
        kern /= kern.sum()
        t = data.astype(np.float64)
        for axis in range(3):
            t = correlate1d(t, kern, axis=axis, mode="nearest")
        t = t - c
    elif kind == "niblack":
        m, var = _window_mean_var(data, w)
        t = m + k * np.sqrt(var)
    else:  # sauvola
        if r is None:
            r = default_sauvola_r(data.dtype)
        if r <= 0:
            raise ParameterError(f"sauvola R must be positive, got {r}")
        m, var = _window_mean_var(data, w)
        t = m * (1.0 + k * (np.sqrt(var) / r - 1.0))
    return (data > t).astype(LABEL_DTYPE)
