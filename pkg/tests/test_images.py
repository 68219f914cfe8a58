import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurotopo import (
    BinaryImage,
    GrayImage,
    ImageStack,
    band_threshold,
    max_projection,
    median_filter,
    region_mode,
)
from neurotopo.pnm import ImageFormatError, load_gray, load_image, save_image, save_mask

from conftest import naive_median, naive_mode, paint_rounded_rect


def gray(arr, calibration=None):
    return GrayImage(np.asarray(arr, dtype=np.uint8), calibration)


class TestTypes:
    def test_invariants(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((0, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            GrayImage(np.zeros((2, 2), dtype=np.uint8), calibration=0.0)
        with pytest.raises(ValueError):
            GrayImage(np.full((2, 2), 300))

    def test_images_are_immutable(self):
        img = gray(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1

    def test_stack_needs_uniform_slices(self):
        a = gray(np.zeros((4, 4)))
        b = gray(np.zeros((4, 5)))
        with pytest.raises(ValueError):
            ImageStack((a, b))
        c = gray(np.zeros((4, 4)), calibration=0.5)
        with pytest.raises(ValueError):
            ImageStack((a, c))


class TestPnmIo:
    def test_p2_literal(self, tmp_path):
        path = tmp_path / "tiny.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 255 128 7\n")
        img = load_gray(path)
        assert img.pixels.tolist() == [[0, 255], [128, 7]]

    def test_round_trip_all_formats(self, tmp_path):
        rng = np.random.default_rng(7)
        img = gray(rng.integers(0, 256, (16, 16)))
        for fmt in ("P2", "P5"):
            path = tmp_path / f"img.{fmt}.pgm"
            save_image(img, path, fmt)
            back = load_gray(path)
            assert np.array_equal(back.pixels, img.pixels)
        channels = {tag: gray(rng.integers(0, 256, (16, 16))) for tag in ("red", "green", "blue")}
        path = tmp_path / "img.pam"
        save_image(channels, path, "P7")
        back = load_image(path)
        for tag in channels:
            assert np.array_equal(back[tag].pixels, channels[tag].pixels)

    def test_pam_byte_level_oracle(self, tmp_path):
        # expected bytes written out by hand first: 2x2, 3 channels interleaved
        red = [[1, 2], [3, 4]]
        green = [[10, 20], [30, 40]]
        blue = [[100, 200], [130, 140]]
        header = b"P7\nWIDTH 2\nHEIGHT 2\nDEPTH 3\nMAXVAL 255\nTUPLTYPE RGB\nENDHDR\n"
        raster = bytes([1, 10, 100, 2, 20, 200, 3, 30, 130, 4, 40, 140])
        path = tmp_path / "oracle.pam"
        path.write_bytes(header + raster)
        out = load_image(path)
        assert out["red"].pixels.tolist() == red
        assert out["green"].pixels.tolist() == green
        assert out["blue"].pixels.tolist() == blue
        # writer reproduces the same byte stream
        save_image(out, tmp_path / "copy.pam", "P7")
        assert (tmp_path / "copy.pam").read_bytes() == header + raster

    def test_comments_are_skipped(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P2\n# a comment\n2 1\n# another\n255\n9 10\n")
        assert load_gray(path).pixels.tolist() == [[9, 10]]

    @pytest.mark.parametrize(
        "payload, fragment",
        [
            (b"P2\n2 2\n255\n0 1 2\n", "truncated"),
            (b"P2\n2 x\n255\n0 1 2 3\n", "malformed"),
            (b"P2\n2 2\n65535\n0 1 2 3\n", "maxval"),
            (b"P5\n4 4\n255\n" + b"\x00" * 7, "truncated"),
            (b"P3\n2 2\n255\n", "magic"),
            (b"P7\nWIDTH 2\nHEIGHT 2\nDEPTH 1\nMAXVAL 999\nENDHDR\n", "maxval"),
            (b"P7\nWIDTH 2\nDEPTH 1\nMAXVAL 255\nENDHDR\nab", "missing"),
        ],
    )
    def test_errors_carry_byte_offsets(self, tmp_path, payload, fragment):
        path = tmp_path / "bad.pnm"
        path.write_bytes(payload)
        with pytest.raises(ImageFormatError) as err:
            load_image(path)
        assert fragment in str(err.value)
        assert "byte offset" in str(err.value)
        assert 0 <= err.value.offset <= len(payload)

    def test_save_mask_is_0_255(self, tmp_path):
        mask = BinaryImage(np.array([[True, False]]))
        save_mask(mask, tmp_path / "m.pgm")
        assert load_gray(tmp_path / "m.pgm").pixels.tolist() == [[255, 0]]

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_property(self, seed):
        import tempfile

        rng = np.random.default_rng(seed)
        img = gray(rng.integers(0, 256, (rng.integers(1, 12), rng.integers(1, 12))))
        with tempfile.TemporaryDirectory() as tmp:
            path = f"{tmp}/img.pgm"
            save_image(img, path, "P5")
            assert np.array_equal(load_gray(path).pixels, img.pixels)


class TestMedianFilter:
    def test_constant_unchanged(self):
        img = gray(np.full((6, 6), 42))
        assert np.array_equal(median_filter(img, 1).pixels, img.pixels)

    def test_single_hot_pixel_removed(self):
        # all nine 3x3 windows contain at most one 255: every median is 0
        px = np.zeros((3, 3), dtype=np.uint8)
        px[1, 1] = 255
        out = median_filter(gray(px), 1)
        assert out.pixels.max() == 0

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(3)
        for radius in (1, 2):
            px = rng.integers(0, 256, (8, 8)).astype(np.uint8)
            out = median_filter(gray(px), radius)
            assert np.array_equal(out.pixels, naive_median(px, radius))

    def test_lower_median_at_even_windows(self):
        # corner window of a 2x2 image has 4 entries; lower median = 2nd smallest
        px = np.array([[10, 200], [150, 90]], dtype=np.uint8)
        out = median_filter(gray(px), 1)
        assert out.pixels[0, 0] == sorted([10, 200, 150, 90])[1]

    def test_twice_equals_thrice_on_thick_blobs(self):
        # documented fixed-point property on blobs >= 3 px thick, binary values
        img = np.zeros((32, 32), dtype=np.uint8)
        paint_rounded_rect(img, 3, 3, 9, 7, value=255)
        paint_rounded_rect(img, 16, 14, 8, 10, value=255)
        once = median_filter(gray(img), 1)
        twice = median_filter(once, 1)
        thrice = median_filter(twice, 1)
        assert np.array_equal(twice.pixels, thrice.pixels)

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            median_filter(gray(np.zeros((3, 3))), 0)


class TestBandThreshold:
    def test_full_band(self):
        img = gray(np.arange(9).reshape(3, 3))
        assert band_threshold(img, 0, 255).mask.all()

    def test_tight_band_on_constant(self):
        img = gray(np.full((3, 3), 77))
        assert band_threshold(img, 77, 77).mask.all()
        assert not band_threshold(img, 78, 78).mask.any()

    def test_matches_predicate(self):
        rng = np.random.default_rng(5)
        px = rng.integers(0, 256, (10, 10)).astype(np.uint8)
        out = band_threshold(gray(px), 50, 100)
        assert np.array_equal(out.mask, (px >= 50) & (px <= 100))

    @given(
        st.integers(0, 255),
        st.integers(0, 255),
        st.integers(0, 255),
        st.integers(0, 255),
        st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_widening_never_removes_pixels(self, lo1, hi1, lo2, hi2, seed):
        lo1, hi1 = min(lo1, hi1), max(lo1, hi1)
        lo2, hi2 = min(lo2, lo1), max(hi2, hi1)  # [lo2, hi2] contains [lo1, hi1]
        rng = np.random.default_rng(seed)
        img = gray(rng.integers(0, 256, (6, 6)))
        narrow = band_threshold(img, lo1, hi1).mask
        wide = band_threshold(img, lo2, hi2).mask
        assert not (narrow & ~wide).any()

    def test_rejects_inverted_band(self):
        with pytest.raises(ValueError):
            band_threshold(gray(np.zeros((2, 2))), 10, 5)


class TestMaxProjection:
    def test_single_slice_identity(self):
        img = gray(np.arange(16).reshape(4, 4), calibration=0.5)
        out = max_projection(ImageStack((img,)))
        assert np.array_equal(out.pixels, img.pixels)
        assert out.calibration == 0.5

    def test_disjoint_spots_union(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.zeros((4, 4), dtype=np.uint8)
        a[0, 0] = 200
        b[3, 3] = 90
        out = max_projection(ImageStack((gray(a), gray(b))))
        assert out.pixels[0, 0] == 200 and out.pixels[3, 3] == 90
        assert out.pixels.sum() == 290

    def test_matches_fold_oracle_and_properties(self):
        rng = np.random.default_rng(9)
        slices = tuple(gray(rng.integers(0, 256, (6, 6))) for _ in range(5))
        out = max_projection(ImageStack(slices))
        expect = slices[0].pixels
        for s in slices[1:]:
            expect = np.maximum(expect, s.pixels)
        assert np.array_equal(out.pixels, expect)
        # commutative in slice order, idempotent on duplicated stacks
        shuffled = max_projection(ImageStack(slices[::-1]))
        assert np.array_equal(shuffled.pixels, out.pixels)
        doubled = max_projection(ImageStack(slices + slices))
        assert np.array_equal(doubled.pixels, out.pixels)


class TestRegionMode:
    def test_constant(self):
        assert region_mode(gray(np.full((9, 9), 31)), (4, 4), 3) == 31

    def test_disk_interior(self):
        img = np.zeros((21, 21), dtype=np.uint8)
        ys, xs = np.mgrid[0:21, 0:21]
        img[(xs - 10) ** 2 + (ys - 10) ** 2 <= 36] = 200
        assert region_mode(gray(img), (10, 10), 4) == 200

    def test_matches_counting_oracle_with_tie_break(self):
        # half-and-half disk: equal counts of two values -> lower one wins
        img = np.zeros((11, 11), dtype=np.uint8)
        img[:, :5] = 80
        img[:, 6:] = 120
        got = region_mode(gray(img), (5, 5), 3)
        assert got == naive_mode(img, (5, 5), 3)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(11)
        px = rng.integers(0, 4, (15, 15)).astype(np.uint8) * 60
        img = gray(px)
        for center, radius in [((7, 7), 5), ((2, 3), 4), ((14, 0), 2)]:
            assert region_mode(img, center, radius) == naive_mode(px, center, radius)

    def test_center_must_be_inside(self):
        with pytest.raises(ValueError):
            region_mode(gray(np.zeros((4, 4))), (10, 1), 2)
