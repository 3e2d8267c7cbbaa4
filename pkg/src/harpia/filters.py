"""Smoothing, edge-enhancement, and texture-feature operators.

All neighborhood operators use clamp-to-edge (replicate) borders at the
volume faces, matching the chunk engine's stitching rule.  Each operator
is a pure function of a (Z, Y, X) array; chunk halos are declared in the
registry.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d, median_filter, uniform_filter

from .errors import ParameterError

DIFFUSION_MODES = ("exponential", "rational")


def gaussian_kernel_radius(sigma: float) -> int:
    # truncation at 4 sigma keeps tail mass below 1e-4
    return int(math.ceil(4.0 * sigma))


def _gaussian_kernel(sigma: float) -> np.ndarray:
    r = gaussian_kernel_radius(sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return (k / k.sum()).astype(np.float32)


def gaussian(data: np.ndarray, sigma: float) -> np.ndarray:
    """Separable 3D Gaussian; kernel truncated at ceil(4*sigma)."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    k = _gaussian_kernel(sigma)
    out = data.astype(np.float32, copy=True)
    for axis in range(3):
        out = correlate1d(out, k, axis=axis, mode="nearest")
    return out


def _box_sum(padded: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1)^3 window for every interior voxel of ``padded``.

    ``padded`` must already carry r replicated cells on every face.
    Accumulates in int64 for integer inputs, float64 otherwise.
    """
    acc_dtype = np.int64 if np.issubdtype(padded.dtype, np.integer) else np.float64
    acc = padded.astype(acc_dtype)
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


def mean(data: np.ndarray, radius: int) -> np.ndarray:
    """Box average over the clamped (2r+1)^3 window, float32 output.

    float64 accumulation is exact for all supported integer inputs at the
    window sizes involved, so this matches an integer box sum bit for bit.
    """
    if radius < 1:
        raise ParameterError(f"radius must be >= 1, got {radius}")
    out = uniform_filter(data.astype(np.float64), size=2 * radius + 1, mode="nearest")
    return out.astype(np.float32)


def median(data: np.ndarray, radius: int) -> np.ndarray:
    """Median of the clamped cubic window; preserves input dtype."""
    if radius < 1:
        raise ParameterError(f"radius must be >= 1, got {radius}")
    return median_filter(data, size=2 * radius + 1, mode="nearest")


def nlm(
    data: np.ndarray,
    h: float,
    patch_radius: int = 1,
    search_radius: int = 3,
    sigma_noise: float = 0.0,
) -> np.ndarray:
    """Non-local means with uniform patch weighting.

    Weight per candidate offset: w = exp(-max(d^2 - 2*sigma_noise^2, 0) / h^2)
    where d^2 is the mean squared patch difference; the self-weight (1) is
    included.
    """
    if h <= 0:
        raise ParameterError(f"h must be positive, got {h}")
    if patch_radius < 0 or search_radius < 1:
        raise ParameterError("patch_radius must be >= 0 and search_radius >= 1")
    pr, sr = patch_radius, search_radius
    pad = pr + sr
    src = np.pad(data.astype(np.float64), pad, mode="edge")
    shp = data.shape
    wsum = np.zeros(shp, dtype=np.float64)
    acc = np.zeros(shp, dtype=np.float64)
    center = src[pad : pad + shp[0], pad : pad + shp[1], pad : pad + shp[2]]

    def patch_mean_sq(diff):
        # mean over the (2pr+1)^3 patch around each voxel
        if pr == 0:
            return diff * diff
        padded = np.pad(diff * diff, pr, mode="edge")
        return _box_sum(padded, pr) / (2 * pr + 1) ** 3

    offsets = [
        (dz, dy, dx)
        for dz in range(-sr, sr + 1)
        for dy in range(-sr, sr + 1)
        for dx in range(-sr, sr + 1)
    ]
    for dz, dy, dx in offsets:
        shifted = src[
            pad + dz : pad + dz + shp[0],
            pad + dy : pad + dy + shp[1],
            pad + dx : pad + dx + shp[2],
        ]
        d2 = patch_mean_sq(shifted - center)
        w = np.exp(-np.maximum(d2 - 2.0 * sigma_noise**2, 0.0) / (h * h))
        acc += w * shifted
        wsum += w
    return (acc / wsum).astype(np.float32)


def unsharp(data: np.ndarray, sigma: float, amount: float) -> np.ndarray:
    """out = I + amount * (I - gaussian(I, sigma))."""
    base = data.astype(np.float32)
    return base + np.float32(amount) * (base - gaussian(data, sigma))


def anisotropic_diffusion(
    data: np.ndarray,
    iterations: int,
    kappa: float,
    dt: float = 1.0 / 6.0,
    mode: str = "exponential",
) -> np.ndarray:
    """Perona-Malik diffusion over the 6 axial neighbors.

    Per step: I += dt * sum g(grad) * grad; dt must be in (0, 1/6] for
    3D stability.  Replicated borders make the volume a closed system.
    """
    if iterations < 1:
        raise ParameterError(f"iterations must be >= 1, got {iterations}")
    if not 0 < dt <= 1.0 / 6.0 + 1e-12:
        raise ParameterError(f"dt must be in (0, 1/6], got {dt}")
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if mode not in DIFFUSION_MODES:
        raise ParameterError(f"mode must be one of {DIFFUSION_MODES}, got {mode!r}")

    def g(grad):
        scaled = (grad / np.float32(kappa)) ** 2
        if mode == "exponential":
            return np.exp(-scaled)
        return 1.0 / (1.0 + scaled)

    out = data.astype(np.float32, copy=True)
    for _ in range(iterations):
        flux = np.zeros_like(out)
        for axis in range(3):
            fwd = np.concatenate(
                [np.diff(out, axis=axis), np.zeros_like(np.take(out, [0], axis=axis))],
                axis=axis,
            )
            # backward difference of voxel i is -(forward difference of i-1)
            bwd = -np.roll(fwd, 1, axis=axis)
            idx = [slice(None)] * 3
            idx[axis] = slice(0, 1)
            bwd[tuple(idx)] = 0.0
            flux += g(fwd) * fwd + g(bwd) * bwd
        out += np.float32(dt) * flux
    return out


def _gradient_magnitude(data: np.ndarray, smooth: np.ndarray) -> np.ndarray:
    deriv = np.array([-1.0, 0.0, 1.0], dtype=np.float32)
    base = data.astype(np.float32)
    total = np.zeros(data.shape, dtype=np.float32)
    for d_axis in range(3):
        comp = base
        for axis in range(3):
            k = deriv if axis == d_axis else smooth
            comp = correlate1d(comp, k, axis=axis, mode="nearest")
        total += comp * comp
    return np.sqrt(total)


def sobel(data: np.ndarray) -> np.ndarray:
    """3D gradient magnitude with [1,2,1] cross-axis smoothing."""
    return _gradient_magnitude(data, np.array([1.0, 2.0, 1.0], dtype=np.float32))


def prewitt(data: np.ndarray) -> np.ndarray:
    """3D gradient magnitude with [1,1,1] cross-axis smoothing."""
    return _gradient_magnitude(data, np.array([1.0, 1.0, 1.0], dtype=np.float32))


# 8-neighborhood clockwise from top-left; first offset maps to bit 7
LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp2d(data: np.ndarray) -> np.ndarray:
    """Per-Z-slice 8-neighbor local binary pattern.

    Bit set when neighbor >= center, clockwise from the top-left
    neighbor (bit 7) down to the left neighbor (bit 0).
    """
    out = np.zeros(data.shape, dtype=np.uint8)
    padded = np.pad(data, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, w = data.shape[1], data.shape[2]
    for bit, (dy, dx) in enumerate(LBP_OFFSETS):
        neighbor = padded[:, 1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        out |= (neighbor >= data).astype(np.uint8) << np.uint8(7 - bit)
    return out


HESSIAN_COMPONENTS = ("xx", "yy", "zz", "xy", "xz", "yz")

_AXIS_OF = {"z": 0, "y": 1, "x": 2}


def _central_diff(data: np.ndarray, axis: int) -> np.ndarray:
    padded = np.pad(
        data, [(1, 1) if a == axis else (0, 0) for a in range(3)], mode="edge"
    )
    n = data.shape[axis]
    hi = [slice(None)] * 3
    lo = [slice(None)] * 3
    hi[axis] = slice(2, n + 2)
    lo[axis] = slice(0, n)
    return 0.5 * (padded[tuple(hi)] - padded[tuple(lo)])


def hessian_component(data: np.ndarray, sigma: float, component: str) -> np.ndarray:
    """One second-derivative component of the Gaussian-smoothed volume."""
    if component not in HESSIAN_COMPONENTS:
        raise ParameterError(f"component must be one of {HESSIAN_COMPONENTS}, got {component!r}")
    smoothed = gaussian(data, sigma)
    a = _AXIS_OF[component[0]]
    b = _AXIS_OF[component[1]]
    return _central_diff(_central_diff(smoothed, a), b).astype(np.float32)


def hessian(data: np.ndarray, sigma: float) -> dict[str, np.ndarray]:
    """All six Hessian components (xx, yy, zz, xy, xz, yz)."""
    smoothed = gaussian(data, sigma)
    out = {}
    for comp in HESSIAN_COMPONENTS:
        a = _AXIS_OF[comp[0]]
        b = _AXIS_OF[comp[1]]
        out[comp] = _central_diff(_central_diff(smoothed, a), b).astype(np.float32)
    return out
