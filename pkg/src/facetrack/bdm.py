"""Binary descriptor model: per-pixel 16-bit local similarity codes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import Image

PATCH_SIZE = 32

# The 16 sampled offsets (dx, dy) of the 5x5 ring pattern, in bit order.
# Bit i of a code is 1 iff |sample_i - center| <= threshold.
SAMPLE_OFFSETS = (
    (-2, -2), (0, -2), (2, -2),
    (-1, -1), (0, -1), (1, -1),
    (-2, 0), (-1, 0), (1, 0), (2, 0),
    (-1, 1), (0, 1), (1, 1),
    (-2, 2), (0, 2), (2, 2),
)


class BdmError(Exception):
    pass


@dataclass
class BdmGrid:
    width: int
    height: int
    codes: np.ndarray  # (height, width) uint16
    threshold: int
    partial_offset: int = 0  # cycling start cell for the next partial update


def compute_lbsp(gray_patch: Image, threshold: int = 30) -> BdmGrid:
    """16-bit similarity code per cell over a 32x32 grayscale patch.

    Each code compares the 16 ring samples against the center pixel;
    border samples are edge-clamped.
    """
    if gray_patch.channels != 1:
        raise BdmError("binary codes need a 1-channel patch")
    if (gray_patch.height, gray_patch.width) != (PATCH_SIZE, PATCH_SIZE):
        raise BdmError(
            f"expected {PATCH_SIZE}x{PATCH_SIZE} patch, got {gray_patch.width}x{gray_patch.height}"
        )
    if threshold <= 0:
        raise BdmError(f"threshold must be positive, got {threshold}")

    vals = gray_patch.data[:, :, 0].astype(np.int32)
    padded = np.pad(vals, 2, mode="edge")
    codes = np.zeros((PATCH_SIZE, PATCH_SIZE), dtype=np.uint16)
    for bit, (dx, dy) in enumerate(SAMPLE_OFFSETS):
        sample = padded[2 + dy : 2 + dy + PATCH_SIZE, 2 + dx : 2 + dx + PATCH_SIZE]
        similar = np.abs(sample - vals) <= threshold
        codes |= similar.astype(np.uint16) << bit
    return BdmGrid(width=PATCH_SIZE, height=PATCH_SIZE, codes=codes, threshold=threshold)


def binary_score(model: BdmGrid, cand: BdmGrid) -> float:
    """Similarity in [0, 1]: 1 - differing bits / total bits."""
    if (model.width, model.height) != (cand.width, cand.height):
        raise BdmError("grid dimension mismatch")
    diff = np.bitwise_xor(model.codes, cand.codes)
    bits = np.unpackbits(diff.view(np.uint8)).sum()
    return 1.0 - float(bits) / (16.0 * model.width * model.height)


def update_bdm(model: BdmGrid, fresh: BdmGrid, mode: str, rho: float = 0.10) -> BdmGrid:
    """Template refresh: `full` replaces; `partial` rewrites a cycling cell subset.

    The partial subset is every round(1/rho)-th cell in row-major order,
    starting at the stored offset; the offset advances by one per partial
    update so repeated partials cover every cell.
    """
    if (model.width, model.height) != (fresh.width, fresh.height):
        raise BdmError("grid dimension mismatch")
    if mode == "full":
        return BdmGrid(fresh.width, fresh.height, fresh.codes.copy(), fresh.threshold)
    if mode != "partial":
        raise BdmError(f"unknown update mode {mode!r}")
    period = max(1, int(round(1.0 / rho)))
    codes = model.codes.copy().ravel()
    codes[model.partial_offset :: period] = fresh.codes.ravel()[model.partial_offset :: period]
    return BdmGrid(
        width=model.width,
        height=model.height,
        codes=codes.reshape(model.height, model.width),
        threshold=model.threshold,
        partial_offset=(model.partial_offset + 1) % period,
    )
