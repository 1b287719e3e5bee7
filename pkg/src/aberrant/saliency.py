"""Derive the discriminative crop box from a saliency map and build crop stacks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import Box2D, GrayImage, SaliencyMap
from .errors import BoxOutOfBounds, DimensionMismatch, EmptySaliency

# 4-connectivity
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class CropConfig:
    threshold_fraction: float = 0.5
    pad_fraction: float = 0.1
    stack_size: int = 32
    connectivity: int = 4

    def __post_init__(self):
        if not (0.0 < self.threshold_fraction < 1.0):
            raise ValueError(f"threshold_fraction must be in (0, 1), got {self.threshold_fraction}")
        if self.pad_fraction < 0 or not math.isfinite(self.pad_fraction):
            raise ValueError(f"pad_fraction must be >= 0, got {self.pad_fraction}")
        if self.stack_size < 2:
            raise ValueError(f"stack_size must be >= 2, got {self.stack_size}")
        if self.connectivity != 4:
            raise ValueError("only 4-connectivity is supported")


@dataclass(frozen=True, eq=False)
class CropStack:
    """Image and saliency crops resampled to ``size x size``, values in [0, 1]."""

    size: int
    channel_image: np.ndarray
    channel_saliency: np.ndarray
    source_box: Box2D
    image_width: int
    image_height: int

    def __post_init__(self):
        for ch in (self.channel_image, self.channel_saliency):
            if ch.shape != (self.size, self.size):
                raise ValueError(f"channel shape {ch.shape} != ({self.size}, {self.size})")
            if ch.size and (ch.min() < 0 or ch.max() > 1):
                raise ValueError("stack channel values must lie in [0, 1]")


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Boolean mask of the largest 4-connected component of ``mask``.

    Equal-sized components are resolved in favour of the one whose first pixel
    comes earliest in row-major order.
    """
    labels, count = ndimage.label(mask, structure=_CROSS)
    if count == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    # labels are numbered in row-major order of each component's first pixel,
    # so argmax (first maximum) implements the tie-break
    return labels == int(np.argmax(sizes)) + 1


def extract_crop_box(s: SaliencyMap, cfg: CropConfig = CropConfig()) -> Box2D:
    """Bounding box of the dominant salient region, padded and clamped."""
    peak = float(s.data.max())
    if peak <= 0.0:
        raise EmptySaliency("saliency map is identically zero")
    component = largest_component(s.data >= cfg.threshold_fraction * peak)
    rows = np.flatnonzero(component.any(axis=1))
    cols = np.flatnonzero(component.any(axis=0))
    x0, x1 = float(cols[0]), float(cols[-1] + 1)
    y0, y1 = float(rows[0]), float(rows[-1] + 1)
    px = cfg.pad_fraction * (x1 - x0)
    py = cfg.pad_fraction * (y1 - y0)
    return Box2D(
        max(0.0, x0 - px),
        max(0.0, y0 - py),
        min(float(s.width), x1 + px),
        min(float(s.height), y1 + py),
    )


def _sample_axis(lo: float, hi: float, size: int, limit: int):
    """Bilinear sample positions along one axis.

    Output sample ``j`` sits at ``lo + (j + 0.5) * (hi - lo) / size`` in image
    coordinates. Interpolation is restricted to the pixels the box touches so
    resampled values stay within the crop's own range.
    """
    first = int(math.floor(lo))
    last = min(int(math.ceil(hi)) - 1, limit - 1)
    centers = lo + (np.arange(size) + 0.5) * ((hi - lo) / size) - 0.5
    centers = np.clip(centers, first, last)
    i0 = np.floor(centers).astype(np.intp)
    i1 = np.minimum(i0 + 1, last)
    frac = centers - i0
    return i0, i1, frac, first, last


def _resample(data: np.ndarray, box: Box2D, size: int) -> np.ndarray:
    height, width = data.shape
    x0, x1, fx, cx0, cx1 = _sample_axis(box.x0, box.x1, size, width)
    y0, y1, fy, cy0, cy1 = _sample_axis(box.y0, box.y1, size, height)
    region = data[cy0 : cy1 + 1, cx0 : cx1 + 1]
    fx = fx[None, :]
    fy = fy[:, None]
    top = data[np.ix_(y0, x0)] * (1 - fx) + data[np.ix_(y0, x1)] * fx
    bottom = data[np.ix_(y1, x0)] * (1 - fx) + data[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bottom * fy
    # guard against rounding pushing a convex combination past its endpoints
    return np.clip(out, region.min(), region.max())


def crop_and_stack(
    img: GrayImage, s: SaliencyMap, box: Box2D, cfg: CropConfig = CropConfig()
) -> CropStack:
    if img.data.shape != s.data.shape:
        raise DimensionMismatch(
            f"image {img.width}x{img.height} vs saliency {s.width}x{s.height}"
        )
    if not box.within(img.width, img.height):
        raise BoxOutOfBounds(f"box {box.as_list()} exceeds image {img.width}x{img.height}")
    size = cfg.stack_size
    channel_image = _resample(img.data.astype(np.float64) / 255.0, box, size)
    channel_saliency = _resample(s.data, box, size)
    channel_image.setflags(write=False)
    channel_saliency.setflags(write=False)
    return CropStack(size, channel_image, channel_saliency, box, img.width, img.height)
