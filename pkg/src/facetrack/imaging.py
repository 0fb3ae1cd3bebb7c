"""Shared image primitives: frame buffers, grayscale, cropping, weight masks."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

# ITU-R BT.601 luma coefficients (R, G, B)
_LUMA = np.array([0.299, 0.587, 0.114])


class ImagingError(Exception):
    """Raised for undecodable files, missing paths, and degenerate crops."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left corner (x, y) plus width/height in pixels."""

    x: float
    y: float
    w: float
    h: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains(self, x: float, y: float) -> bool:
        return self.x <= x <= self.x + self.w and self.y <= y <= self.y + self.h

    def intersects_frame(self, width: int, height: int) -> bool:
        return self.x < width and self.y < height and self.x + self.w > 0 and self.y + self.h > 0

    @staticmethod
    def from_center(cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)


class Image:
    """Row-major 8-bit image, 1 (gray) or 3 (RGB) channels.

    Pixel data is stored as an (h, w, c) uint8 array and treated as
    immutable after construction.
    """

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ImagingError(f"expected (h, w, 1|3) pixel array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImagingError(f"empty image of shape {arr.shape}")
        arr.flags.writeable = False
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class WeightMask:
    """Non-negative per-cell weights peaking at the geometric mask center."""

    width: int
    height: int
    weights: np.ndarray  # (height, width), sums to 1


def load_image(path: str) -> Image:
    """Decode a PNG or JPEG file into an RGB image.

    Grayscale sources are expanded to three equal channels.
    """
    if not os.path.exists(path):
        raise ImagingError(f"image not found: {path}")
    try:
        with PILImage.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except ImagingError:
        raise
    except Exception as exc:
        raise ImagingError(f"cannot decode image {path}: {exc}") from exc
    return Image(arr)


def to_grayscale(img: Image) -> Image:
    """BT.601 luma conversion; 1-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    luma = img.data.astype(np.float64) @ _LUMA
    return Image(np.round(luma).astype(np.uint8))


def crop_resize(img: Image, box: BoundingBox, tw: int, th: int) -> Image:
    """Bilinearly resample `box` into a tw-by-th patch.

    Sample points use the half-pixel convention, so an identity box with
    matching target dims is a pixel-exact copy. Samples falling outside
    the frame are edge-clamped rather than zero-filled, which keeps
    partially visible candidate boxes comparable.
    """
    if tw < 1 or th < 1:
        raise ImagingError(f"target patch dims must be positive, got {tw}x{th}")
    if not box.intersects_frame(img.width, img.height):
        raise ImagingError(f"box {box} lies fully outside the {img.width}x{img.height} frame")

    xs = box.x + (np.arange(tw) + 0.5) * (box.w / tw) - 0.5
    ys = box.y + (np.arange(th) + 0.5) * (box.h / th) - 0.5

    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0

    def clamp_x(v: np.ndarray) -> np.ndarray:
        return np.clip(v, 0, img.width - 1).astype(np.intp)

    def clamp_y(v: np.ndarray) -> np.ndarray:
        return np.clip(v, 0, img.height - 1).astype(np.intp)

    ix0, ix1 = clamp_x(x0), clamp_x(x0 + 1)
    iy0, iy1 = clamp_y(y0), clamp_y(y0 + 1)

    src = img.data.astype(np.float64)
    top = src[iy0][:, ix0] * (1 - fx)[None, :, None] + src[iy0][:, ix1] * fx[None, :, None]
    bot = src[iy1][:, ix0] * (1 - fx)[None, :, None] + src[iy1][:, ix1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return Image(np.clip(np.round(out), 0, 255).astype(np.uint8))


def gaussian_weight_mask(w: int, h: int, sigma_frac: float = 0.5) -> WeightMask:
    """Isotropic Gaussian mask over a w-by-h patch, normalized to sum 1.

    sigma = sigma_frac * min(w, h); each cell is weighted by its distance
    to the patch center, so the center cell always carries the maximum.
    """
    if w < 1 or h < 1:
        raise ImagingError(f"mask dims must be positive, got {w}x{h}")
    if sigma_frac <= 0:
        raise ImagingError(f"sigma_frac must be positive, got {sigma_frac}")
    sigma = sigma_frac * min(w, h)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    r2 = (yy - cy) ** 2 + (xx - cx) ** 2
    weights = np.exp(-r2 / (2.0 * sigma * sigma))
    weights /= weights.sum()
    return WeightMask(width=w, height=h, weights=weights)
