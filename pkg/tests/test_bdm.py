import numpy as np
import pytest

from facetrack.bdm import (
    SAMPLE_OFFSETS,
    BdmError,
    BdmGrid,
    binary_score,
    compute_lbsp,
    update_bdm,
)
from facetrack.imaging import Image


def grid_from(codes, threshold=30):
    codes = np.asarray(codes, dtype=np.uint16)
    return BdmGrid(width=codes.shape[1], height=codes.shape[0], codes=codes, threshold=threshold)


class TestComputeLbsp:
    def test_sixteen_unique_offsets(self):
        assert len(SAMPLE_OFFSETS) == 16
        assert len(set(SAMPLE_OFFSETS)) == 16
        assert all(-2 <= dx <= 2 and -2 <= dy <= 2 for dx, dy in SAMPLE_OFFSETS)

    def test_uniform_patch_all_bits_set(self):
        patch = Image(np.full((32, 32), 77, dtype=np.uint8))
        grid = compute_lbsp(patch, threshold=30)
        assert np.all(grid.codes == 0xFFFF)

    def test_bright_center_dark_neighbors(self):
        arr = np.zeros((32, 32), dtype=np.uint8)
        arr[16, 16] = 255
        grid = compute_lbsp(Image(arr), threshold=30)
        assert grid.codes[16, 16] == 0x0000

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        arr = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
        a = compute_lbsp(Image(arr))
        b = compute_lbsp(Image(arr))
        assert np.array_equal(a.codes, b.codes)

    def test_wrong_dims_rejected(self):
        with pytest.raises(BdmError, match="32x32"):
            compute_lbsp(Image(np.zeros((16, 16), dtype=np.uint8)))

    def test_color_patch_rejected(self, uniform_rgb):
        with pytest.raises(BdmError, match="1-channel"):
            compute_lbsp(uniform_rgb(w=32, h=32))

    def test_manual_code_at_border(self):
        # corner cell: edge clamping makes every out-of-patch sample equal
        # to the clamped in-patch value, so a uniform patch stays 0xFFFF there
        patch = Image(np.full((32, 32), 100, dtype=np.uint8))
        grid = compute_lbsp(patch)
        assert grid.codes[0, 0] == 0xFFFF


class TestBinaryScore:
    def test_identical(self):
        rng = np.random.default_rng(6)
        codes = rng.integers(0, 2**16, size=(32, 32))
        g = grid_from(codes)
        assert binary_score(g, g) == 1.0

    def test_complement(self):
        rng = np.random.default_rng(7)
        codes = rng.integers(0, 2**16, size=(32, 32)).astype(np.uint16)
        a = grid_from(codes)
        b = grid_from(np.bitwise_xor(codes, np.uint16(0xFFFF)))
        assert binary_score(a, b) == 0.0

    def test_half_bits_flipped(self):
        a = grid_from(np.zeros((8, 8)))
        b = grid_from(np.full((8, 8), 0x00FF))
        assert binary_score(a, b) == 0.5

    def test_matches_naive_bit_loop(self):
        rng = np.random.default_rng(8)
        a = rng.integers(0, 2**16, size=(8, 8)).astype(np.uint16)
        b = rng.integers(0, 2**16, size=(8, 8)).astype(np.uint16)
        diff_bits = 0
        for x, y in zip(a.ravel(), b.ravel()):
            diff_bits += bin(int(x) ^ int(y)).count("1")
        expected = 1.0 - diff_bits / (16.0 * 64)
        assert binary_score(grid_from(a), grid_from(b)) == pytest.approx(expected, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(9)
        a = grid_from(rng.integers(0, 2**16, size=(8, 8)))
        b = grid_from(rng.integers(0, 2**16, size=(8, 8)))
        assert binary_score(a, b) == binary_score(b, a)

    def test_dim_mismatch(self):
        with pytest.raises(BdmError, match="mismatch"):
            binary_score(grid_from(np.zeros((8, 8))), grid_from(np.zeros((4, 4))))


class TestUpdateBdm:
    def test_full_replaces(self):
        a = grid_from(np.zeros((10, 10)))
        b = grid_from(np.full((10, 10), 7))
        out = update_bdm(a, b, "full")
        assert np.array_equal(out.codes, b.codes)

    def test_partial_fixed_point(self):
        a = grid_from(np.full((10, 10), 3))
        out = update_bdm(a, grid_from(np.full((10, 10), 3)), "partial")
        assert np.array_equal(out.codes, a.codes)

    def test_partial_changes_exactly_ten_of_hundred(self):
        a = grid_from(np.zeros((10, 10)))
        b = grid_from(np.ones((10, 10)))
        out = update_bdm(a, b, "partial")
        assert int((out.codes != a.codes).sum()) == 10

    def test_partial_offset_cycles(self):
        a = grid_from(np.zeros((10, 10)))
        b = grid_from(np.ones((10, 10)))
        first = update_bdm(a, b, "partial")
        second = update_bdm(first, b, "partial")
        assert first.partial_offset == 1
        assert second.partial_offset == 2
        # different cell subsets were touched
        assert int((second.codes != first.codes).sum()) == 10

    def test_converges_within_ten_partials(self):
        rng = np.random.default_rng(11)
        cur = grid_from(rng.integers(0, 2**16, size=(32, 32)))
        fresh = grid_from(rng.integers(0, 2**16, size=(32, 32)))
        for _ in range(10):
            cur = update_bdm(cur, fresh, "partial")
        assert np.array_equal(cur.codes, fresh.codes)

    def test_dim_mismatch(self):
        with pytest.raises(BdmError, match="mismatch"):
            update_bdm(grid_from(np.zeros((8, 8))), grid_from(np.zeros((4, 4))), "full")
