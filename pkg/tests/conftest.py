import numpy as np
import pytest

from facetrack.imaging import Image


@pytest.fixture
def uniform_rgb():
    def make(w=64, h=48, color=(128, 128, 128)):
        arr = np.zeros((h, w, 3), dtype=np.uint8)
        arr[:, :] = color
        return Image(arr)

    return make


@pytest.fixture
def blob_image():
    """Flat gray image with a single bright Gaussian blob."""

    def make(w=64, h=64, cx=25.0, cy=20.0, sigma=3.0, amp=150.0):
        yy, xx = np.mgrid[0:h, 0:w]
        vals = 30.0 + amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma * sigma))
        return Image(np.clip(vals, 0, 255).astype(np.uint8))

    return make
