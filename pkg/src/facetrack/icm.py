"""Isotropic color model: center-weighted 3-channel histogram template."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import BoundingBox, Image, WeightMask, crop_resize

# Maximum L2 distance between two 3-channel normalized histograms: sqrt(2) per channel.
_MAX_DIST = math.sqrt(6.0)

PATCH_SIZE = 32


class IcmError(Exception):
    pass


@dataclass
class IcmHistogram:
    bins_per_channel: int
    values: np.ndarray  # (3, bins), each channel sums to 1
    template_dims: tuple[int, int]  # rounded (w, h) of the source box


def build_icm(img: Image, box: BoundingBox, bins: int = 16, mask: WeightMask | None = None) -> IcmHistogram:
    """Histogram of a 32x32 resampled patch, pixels weighted by the isotropic mask."""
    if box.w < 1 or box.h < 1:
        raise IcmError(f"degenerate box {box.w}x{box.h}")
    if img.channels != 3:
        raise IcmError("color histogram needs a 3-channel image")
    if mask is None:
        from .imaging import gaussian_weight_mask

        mask = gaussian_weight_mask(PATCH_SIZE, PATCH_SIZE)
    if (mask.height, mask.width) != (PATCH_SIZE, PATCH_SIZE):
        raise IcmError(f"mask dims {mask.width}x{mask.height} != patch dims {PATCH_SIZE}x{PATCH_SIZE}")

    patch = crop_resize(img, box, PATCH_SIZE, PATCH_SIZE).data
    binned = (patch.astype(np.intp) * bins) // 256
    values = np.zeros((3, bins))
    w = mask.weights.ravel()
    for c in range(3):
        values[c] = np.bincount(binned[:, :, c].ravel(), weights=w, minlength=bins)[:bins]
    sums = values.sum(axis=1, keepdims=True)
    values = np.divide(values, sums, out=np.zeros_like(values), where=sums > 0)
    return IcmHistogram(
        bins_per_channel=bins,
        values=values,
        template_dims=(int(round(box.w)), int(round(box.h))),
    )


def color_score(model: IcmHistogram, cand: IcmHistogram) -> float:
    """Similarity in [0, 1]: 1 - L2(model, cand) / sqrt(6)."""
    if model.bins_per_channel != cand.bins_per_channel:
        raise IcmError(
            f"bin count mismatch: {model.bins_per_channel} vs {cand.bins_per_channel}"
        )
    dist = float(np.linalg.norm(model.values - cand.values))
    return 1.0 - dist / _MAX_DIST


def update_icm(model: IcmHistogram, fresh: IcmHistogram, mode: str, rho: float = 0.125) -> IcmHistogram:
    """Template refresh: `full` replaces, `partial` blends a rho fraction of fresh mass."""
    if model.bins_per_channel != fresh.bins_per_channel:
        raise IcmError(
            f"bin count mismatch: {model.bins_per_channel} vs {fresh.bins_per_channel}"
        )
    if mode == "full":
        return fresh
    if mode != "partial":
        raise IcmError(f"unknown update mode {mode!r}")
    values = (1.0 - rho) * model.values + rho * fresh.values
    sums = values.sum(axis=1, keepdims=True)
    values = np.divide(values, sums, out=np.zeros_like(values), where=sums > 0)
    return IcmHistogram(
        bins_per_channel=model.bins_per_channel,
        values=values,
        template_dims=model.template_dims,
    )
