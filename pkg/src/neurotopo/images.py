"""Calibrated raster types and the preprocessing filters used by every pipeline.

Images are 8-bit grayscale, stored row-major with pixel (x, y) at
``pixels[y, x]``. Arrays are frozen after construction so instances can be
shared freely between threads and cached inside long-lived sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DimensionMismatch(ValueError):
    """Raised when images that must share a shape do not."""


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image, optionally calibrated in microns per pixel."""

    pixels: np.ndarray
    calibration: Optional[float] = None

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"expected a non-empty 2-d pixel array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        if self.calibration is not None and not self.calibration > 0:
            raise ValueError(f"calibration must be positive, got {self.calibration}")
        object.__setattr__(self, "pixels", _as_readonly(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_calibration(self, microns_per_pixel: float) -> "GrayImage":
        return GrayImage(self.pixels, microns_per_pixel)


@dataclass(frozen=True)
class BinaryImage:
    """Boolean foreground mask (True = foreground)."""

    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mask)
        if m.ndim != 2 or m.size == 0:
            raise ValueError(f"expected a non-empty 2-d mask, got shape {m.shape}")
        object.__setattr__(self, "mask", _as_readonly(m.astype(bool)))

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    def count_foreground(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ImageStack:
    """Ordered z-stack of grayscale slices sharing shape and calibration."""

    slices: tuple
    z_spacing: Optional[float] = None

    def __post_init__(self) -> None:
        slices = tuple(self.slices)
        if not slices:
            raise ValueError("a stack needs at least one slice")
        first = slices[0]
        for s in slices[1:]:
            if (s.width, s.height) != (first.width, first.height):
                raise DimensionMismatch("all slices must share width and height")
            if s.calibration != first.calibration:
                raise ValueError("all slices must share the same calibration")
        if self.z_spacing is not None and not self.z_spacing > 0:
            raise ValueError("z_spacing must be positive")
        object.__setattr__(self, "slices", slices)

    @property
    def width(self) -> int:
        return self.slices[0].width

    @property
    def height(self) -> int:
        return self.slices[0].height

    def __len__(self) -> int:
        return len(self.slices)


def median_filter(img: GrayImage, radius: int = 1) -> GrayImage:
    """Median smoothing over a (2*radius+1)^2 window.

    Windows are truncated at the image border (no padding constants, which
    would bias values near bright structure edges). Windows of even
    cardinality take the lower median.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    h, w = img.pixels.shape
    k = 2 * radius + 1
    # Sentinel 256 sorts after every real intensity, so the first `count`
    # entries of each sorted window column are exactly the in-bounds pixels.
    padded = np.full((h + 2 * radius, w + 2 * radius), 256, dtype=np.int16)
    padded[radius : radius + h, radius : radius + w] = img.pixels
    windows = np.empty((k * k, h, w), dtype=np.int16)
    for dy in range(k):
        for dx in range(k):
            windows[dy * k + dx] = padded[dy : dy + h, dx : dx + w]
    windows.sort(axis=0)

    ys = np.arange(h)
    xs = np.arange(w)
    rows_in = np.minimum(ys + radius, h - 1) - np.maximum(ys - radius, 0) + 1
    cols_in = np.minimum(xs + radius, w - 1) - np.maximum(xs - radius, 0) + 1
    counts = rows_in[:, None] * cols_in[None, :]
    lower_median = (counts - 1) // 2
    out = np.take_along_axis(windows, lower_median[None, :, :], axis=0)[0]
    return GrayImage(out.astype(np.uint8), img.calibration)


def band_threshold(img: GrayImage, lo: int, hi: int = 255) -> BinaryImage:
    """Foreground = pixels whose intensity lies in the closed band [lo, hi]."""
    if not (0 <= lo <= hi <= 255):
        raise ValueError(f"need 0 <= lo <= hi <= 255, got lo={lo}, hi={hi}")
    return BinaryImage((img.pixels >= lo) & (img.pixels <= hi))


def max_projection(stack: ImageStack) -> GrayImage:
    """Per-pixel maximum across all slices; calibration is inherited."""
    out = np.maximum.reduce([s.pixels for s in stack.slices])
    return GrayImage(out, stack.slices[0].calibration)


def region_mode(img: GrayImage, center: tuple, radius: int) -> int:
    """Most frequent intensity within Euclidean distance `radius` of `center`.

    The disk is clipped at the image border; ties break toward the lower
    intensity so results are reproducible across runs.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    cx, cy = float(center[0]), float(center[1])
    h, w = img.pixels.shape
    if not (0 <= cx <= w - 1 and 0 <= cy <= h - 1):
        raise ValueError(f"center {center} lies outside the image")
    x0 = max(int(np.floor(cx - radius)), 0)
    x1 = min(int(np.ceil(cx + radius)), w - 1)
    y0 = max(int(np.floor(cy - radius)), 0)
    y1 = min(int(np.ceil(cy + radius)), h - 1)
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    values = img.pixels[y0 : y1 + 1, x0 : x1 + 1][inside]
    hist = np.bincount(values, minlength=256)
    # argmax returns the first (lowest) intensity among tied counts
    return int(hist.argmax())
