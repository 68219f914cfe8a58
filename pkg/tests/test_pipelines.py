import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurotopo import (
    BinaryImage,
    DimensionMismatch,
    GrayImage,
    ImageStack,
    LocateParams,
    NucleusParams,
    RoiPolyline,
    band_threshold,
    count_nuclei,
    count_synapses,
    extract_structure,
    locate_neurons,
    max_projection,
    median_filter,
    percent_change,
    zigzag_h0,
)
from neurotopo.pipelines import rasterize_roi_band

from conftest import paint_blob_39, paint_blob_40, paint_rounded_rect


def gray(arr, calibration=None):
    return GrayImage(np.asarray(arr, dtype=np.uint8), calibration)


# -- ROI ----------------------------------------------------------------------


class TestRoi:
    def test_needs_two_vertices(self):
        with pytest.raises(ValueError):
            RoiPolyline(((1.0, 2.0),))

    def test_arc_length_and_microns(self):
        roi = RoiPolyline(((0, 0), (3, 4), (3, 10)))
        assert roi.arc_length_px == pytest.approx(5 + 6)
        assert roi.length_microns(0.5) == pytest.approx(5.5)

    def test_json_round_trip(self):
        roi = RoiPolyline(((1.5, 2.25), (10, 20), (30.125, 5)), band_width=6)
        back = RoiPolyline.from_json(roi.to_json())
        assert back == roi

    def test_band_rasterization_is_distance_based(self):
        roi = RoiPolyline(((2, 5), (12, 5)), band_width=2)
        mask = rasterize_roi_band(roi, 16, 11).mask
        assert mask[5, 7] and mask[3, 7] and mask[7, 7]
        assert not mask[5 + 3, 7]
        # brute-force distance check over the whole image
        for y in range(11):
            for x in range(16):
                t = min(max((x - 2) / 10.0, 0.0), 1.0)
                d = math.hypot(x - (2 + 10 * t), y - 5)
                assert mask[y, x] == (d <= 2)


# -- synapse counting ------------------------------------------------------------


def synapse_fixture():
    """Three coincident blobs inside the dendrite band, two outside it."""
    red = np.zeros((128, 128), dtype=np.uint8)
    green = np.zeros((128, 128), dtype=np.uint8)
    for cx, cy in ((30, 64), (60, 64), (90, 64), (30, 20), (90, 110)):
        red[cy - 1 : cy + 2, cx - 1 : cx + 2] = 200
        green[cy - 1 : cy + 2, cx - 1 : cx + 2] = 180
    roi = RoiPolyline(((10, 64), (118, 64)), band_width=4)
    return gray(red), gray(green), roi


class TestCountSynapses:
    def test_disjoint_channels_count_zero(self):
        red = np.zeros((32, 32), dtype=np.uint8)
        green = np.zeros((32, 32), dtype=np.uint8)
        red[5:8, 5:8] = 200
        green[20:23, 20:23] = 200
        roi = RoiPolyline(((0, 0), (31, 31)), band_width=31)
        report = count_synapses(gray(red), gray(green), roi, (50, 255), (50, 255), 0.5)
        assert report.count == 0
        assert report.density_per_100um == None or report.density_per_100um == 0

    def test_three_blob_fixture(self):
        red, green, roi = synapse_fixture()
        report = count_synapses(red, green, roi, (50, 255), (50, 255), calibration=1.0)
        assert report.count == 3
        assert report.marked_mask.count_foreground() == 27
        assert report.density_per_100um == pytest.approx(100.0 * 3 / roi.arc_length_px)

    def test_dendrite_length_at_standard_calibration(self):
        # 1024x1024 frame imaged at 228 um across: 228/1024 um per pixel
        calib = 228.0 / 1024.0
        roi = RoiPolyline(((0, 0), (1000, 0), (1000, 1000), (755, 1000)), band_width=4)
        assert roi.arc_length_px == pytest.approx(2245.0)
        red = gray(np.zeros((1024, 1024)))
        report = count_synapses(red, red, roi, (50, 255), (50, 255), calibration=calib)
        assert report.dendrite_length_um == pytest.approx(2245 * calib)
        assert abs(report.dendrite_length_um - 500.0) < 0.5

    def test_narrowing_band_shrinks_mask_pointwise(self):
        red, green, roi = synapse_fixture()
        wide = count_synapses(red, green, roi, (50, 255), (50, 255)).marked_mask.mask
        narrow = count_synapses(red, green, roi, (150, 255), (50, 255)).marked_mask.mask
        assert not (narrow & ~wide).any()

    def test_count_equals_mask_components(self):
        red, green, roi = synapse_fixture()
        report = count_synapses(red, green, roi, (50, 255), (50, 255))
        from neurotopo import label_components

        assert report.count == label_components(report.marked_mask, 8).count

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            count_synapses(gray(np.zeros((4, 4))), gray(np.zeros((4, 5))), None, (0, 255), (0, 255))

    def test_no_roi_means_whole_frame_and_no_density(self):
        red, green, _ = synapse_fixture()
        report = count_synapses(red, green, None, (50, 255), (50, 255))
        assert report.count == 5
        assert report.dendrite_length_um is None and report.density_per_100um is None

    def test_csv_and_json_shapes(self):
        red, green, roi = synapse_fixture()
        report = count_synapses(red, green, roi, (50, 255), (50, 255), calibration=1.0)
        blob = report.to_json_dict()
        assert blob["count"] == 3 and blob["red_range"] == [50, 255]
        lines = report.to_csv().strip().splitlines()
        assert lines[0].startswith("count,") and lines[1].startswith("3,")


class TestPercentChange:
    def test_published_validation_means(self):
        assert percent_change(24.12, 16.74) == pytest.approx(30.6, abs=0.05)
        assert percent_change(26.03, 16.50) == pytest.approx(36.6, abs=0.05)

    def test_identity_is_zero(self):
        assert percent_change(7.5, 7.5) == 0.0

    @given(st.floats(0.1, 1e6), st.floats(-100, 100))
    @settings(max_examples=80, deadline=None)
    def test_algebraic_inverse(self, control, pct):
        treatment = control * (1 - pct / 100.0)
        assert percent_change(control, treatment) == pytest.approx(pct, abs=1e-6)

    def test_control_must_be_positive(self):
        with pytest.raises(ValueError):
            percent_change(0.0, 1.0)


# -- nucleus counting ---------------------------------------------------------------


def nuclei_fixture():
    nuclei = np.zeros((128, 192), dtype=np.uint8)
    paint_blob_39(nuclei, 10, 10)  # exactly 39 px -> too-small
    paint_rounded_rect(nuclei, 60, 10, 41, 5)  # 201 px -> too-large
    paint_rounded_rect(nuclei, 10, 40, 24, 8)  # 188 px, elongation ~3 -> oblong
    paint_rounded_rect(nuclei, 60, 40, 13, 8)  # 100 px round, overlaps neurons
    paint_rounded_rect(nuclei, 110, 40, 13, 8)  # 100 px round, no neuron overlap
    neurons = np.zeros_like(nuclei)
    paint_rounded_rect(neurons, 60, 40, 13, 8)
    return gray(nuclei), gray(neurons)


def cluster_fixture():
    """3x3 grid of 100-px blobs with 3-px gaps; the central one sits in a
    neighborhood whose mode never falls off."""
    nuclei = np.zeros((64, 80), dtype=np.uint8)
    for gy in range(3):
        for gx in range(3):
            paint_rounded_rect(nuclei, 10 + 16 * gx, 10 + 11 * gy, 13, 8)
    neurons = np.full_like(nuclei, 200)
    return gray(nuclei), gray(neurons), (10 + 16, 10 + 11)


class TestCountNuclei:
    def test_gate_verdicts(self):
        nuclei, neurons = nuclei_fixture()
        report = count_nuclei(nuclei, neurons)
        reasons = {}
        for stats, reason in report.rejected:
            reasons[stats.area] = reason
        assert reasons[39] == "too-small"
        assert reasons[201] == "too-large"
        assert reasons[188] == "oblong"
        assert reasons[100] == "no-neuron-overlap"
        kept_areas = [s.area for s, _ in report.kept]
        assert kept_areas == [100]
        assert report.total_cells == 2  # both round blobs are cells
        assert report.neuron_count == 1
        assert len(report.kept) + len(report.rejected) == 5

    def test_area_boundaries_inclusive(self):
        # exactly 40 and exactly 200 pass the size gates
        nuclei = np.zeros((64, 96), dtype=np.uint8)
        paint_blob_40(nuclei, 10, 10)  # 40 px, round
        paint_rounded_rect(nuclei, 40, 30, 17, 12)  # 200 px
        neurons = np.full_like(nuclei, 200)
        report = count_nuclei(gray(nuclei), gray(neurons))
        assert {s.area for s, _ in report.kept} == {40, 200}
        assert not report.rejected

    def test_dense_cluster_rejected(self):
        nuclei, neurons, center_xy = cluster_fixture()
        report = count_nuclei(nuclei, neurons)
        center_entries = [
            (s, r)
            for s, r in report.rejected
            if abs(s.centroid[0] - (center_xy[0] + 6)) < 2 and abs(s.centroid[1] - (center_xy[1] + 3.5)) < 2
        ]
        assert len(center_entries) == 1
        assert center_entries[0][1] == "dense-cluster"

    def test_isolated_round_blob_passes_everything(self):
        nuclei = np.zeros((64, 64), dtype=np.uint8)
        paint_rounded_rect(nuclei, 25, 25, 13, 8)
        neurons = np.zeros_like(nuclei)
        paint_rounded_rect(neurons, 25, 25, 13, 8)
        report = count_nuclei(gray(nuclei), gray(neurons))
        assert report.total_cells == 1 and report.neuron_count == 1
        assert report.kept[0][1] == "neuron"

    def test_min_area_changes_never_flip_non_area_reasons(self):
        nuclei, neurons = nuclei_fixture()
        loose = count_nuclei(nuclei, neurons, NucleusParams(min_area=20))
        strict = count_nuclei(nuclei, neurons, NucleusParams(min_area=40))

        def non_area_reasons(report):
            return {
                s.centroid: r
                for s, r in report.rejected
                if r not in ("too-small", "too-large")
            }

        loose_map, strict_map = non_area_reasons(loose), non_area_reasons(strict)
        for centroid, reason in strict_map.items():
            assert loose_map.get(centroid, reason) == reason

    def test_absolute_axis_mode(self):
        nuclei = np.zeros((64, 64), dtype=np.uint8)
        paint_rounded_rect(nuclei, 10, 10, 13, 8)  # axes differ by ~5.6 px
        neurons = np.full_like(nuclei, 200)
        ratio = count_nuclei(gray(nuclei), gray(neurons), NucleusParams(axis_mode="ratio"))
        absolute = count_nuclei(gray(nuclei), gray(neurons), NucleusParams(axis_mode="absolute"))
        assert ratio.neuron_count == 1  # elongation 1.63 < 2
        assert absolute.rejected and absolute.rejected[0][1] == "oblong"

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            count_nuclei(gray(np.zeros((4, 4))), gray(np.zeros((5, 4))))

    def test_report_serialization(self):
        nuclei, neurons = nuclei_fixture()
        report = count_nuclei(nuclei, neurons)
        blob = report.to_json_dict()
        assert blob["total_cells"] == 2 and blob["params"]["min_area"] == 40
        lines = report.to_csv().strip().splitlines()
        assert lines[0].startswith("label,area")
        assert len(lines) == 1 + 5


# -- neuron localization ---------------------------------------------------------------


def cross_fixture(offset_x=0, offset_y=0):
    """Dashed cross centered in tile (2,2): soma plus four arms reaching 18 px
    into the orthogonal neighbor tiles (pattern 3 on, 2 off)."""
    img = np.zeros((128 + offset_y, 128 + offset_x), dtype=np.uint8)
    cx, cy = 62 + offset_x, 62 + offset_y
    img[cy - 1 : cy + 2, cx - 1 : cx + 2] = 255
    for k in range(1, 33):
        if k % 5 in (0, 1, 2):
            img[cy, cx + k] = img[cy, cx - k] = 200
            img[cy + k, cx] = img[cy - k, cx] = 200
    return gray(img)


CROSS_PARAMS = LocateParams(tile=25, min_path=15, max_gap=2, seed_threshold=255)


class TestLocateNeurons:
    def test_blank_image(self):
        report = locate_neurons(gray(np.zeros((64, 64))))
        assert report.regions == () and report.seeds == ()

    def test_single_bright_pixel_no_paths(self):
        img = np.zeros((64, 64), dtype=np.uint8)
        img[10, 10] = 255
        report = locate_neurons(gray(img), LocateParams(seed_threshold=255))
        assert len(report.seeds) == 1
        assert report.regions == ()

    def test_cross_fixture_accepts_exactly_five_tiles(self):
        report = locate_neurons(cross_fixture(), CROSS_PARAMS)
        assert len(report.regions) == 1
        region = report.regions[0]
        assert set(region.tiles) == {(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)}
        assert region.bounding_box == (25, 25, 99, 99)

    def test_translation_by_whole_tiles_shifts_boxes(self):
        base = locate_neurons(cross_fixture(), CROSS_PARAMS)
        moved = locate_neurons(cross_fixture(25, 50), CROSS_PARAMS)
        shift = {(tx + 1, ty + 2) for tx, ty in base.regions[0].tiles}
        assert set(moved.regions[0].tiles) == shift

    def test_gap_tolerance_matters(self):
        # with max_gap 1 the 2-px dashes are unreachable: no region survives
        report = locate_neurons(cross_fixture(), LocateParams(tile=25, min_path=15, max_gap=1, seed_threshold=255))
        assert all(len(r.tiles) <= 1 for r in report.regions)

    def test_seed_dedup_one_per_tile(self):
        report = locate_neurons(cross_fixture(), CROSS_PARAMS)
        assert len(report.seeds) == 1

    def test_json_dict(self):
        report = locate_neurons(cross_fixture(), CROSS_PARAMS)
        blob = report.to_json_dict()
        assert blob["params"]["tile"] == 25 and len(blob["regions"]) == 1


# -- structure extraction ------------------------------------------------------------


def blob_stack(n_slices=3, with_speck_in=None):
    slices = []
    for i in range(n_slices):
        img = np.zeros((48, 48), dtype=np.uint8)
        paint_rounded_rect(img, 8, 8, 10, 9, value=220)
        if with_speck_in == i:
            paint_rounded_rect(img, 33, 33, 5, 4, value=70)
        slices.append(gray(img))
    return ImageStack(tuple(slices))


class TestExtractStructure:
    def test_identical_slices_min_persistence_one_is_binarization(self):
        stack = blob_stack()
        result = extract_structure(stack, levels=[200, 130, 60], min_persistence=1)
        filtered = ImageStack(tuple(median_filter(s, 1) for s in stack.slices))
        projection = max_projection(filtered)
        assert np.array_equal(result.structure.mask, band_threshold(projection, 60).mask)

    def test_transient_speck_removed(self):
        stack = blob_stack(with_speck_in=0)
        keep_all = extract_structure(stack, levels=[200, 130, 60], min_persistence=1)
        assert keep_all.structure.mask[35, 35]  # speck survives the filter and projection
        denoised = extract_structure(stack, levels=[200, 130, 60], min_persistence=2)
        assert denoised.structure.mask[10, 10]
        assert not denoised.structure.mask[35, 35]

    def test_structure_is_subset_of_final_binarization(self):
        stack = blob_stack(with_speck_in=1)
        result = extract_structure(stack, levels=[200, 130, 60], min_persistence=2)
        filtered = ImageStack(tuple(median_filter(s, 1) for s in stack.slices))
        final = band_threshold(max_projection(filtered), 60).mask
        assert not (result.structure.mask & ~final).any()

    def test_barcode_provenance_present(self):
        result = extract_structure(blob_stack(), levels=[200, 130, 60], min_persistence=2)
        assert result.barcode.bars(0)
        assert result.levels == (200.0, 130.0, 60.0)

    def test_zigzag_cross_check(self):
        # per-slice specks die in zigzag; the persistent structure components
        # are exactly the classes spanning every slice
        slices = []
        for i in range(3):
            img = np.zeros((48, 48), dtype=np.uint8)
            paint_rounded_rect(img, 5, 5, 8, 7, value=220)
            paint_rounded_rect(img, 30, 30, 8, 7, value=220)
            paint_rounded_rect(img, 5 + 10 * i, 30, 5, 4, value=70)
            slices.append(gray(img))
        stack = ImageStack(tuple(slices))
        result = extract_structure(stack, levels=[200, 130, 60], min_persistence=3)
        from neurotopo import label_components

        n_structure = label_components(result.structure, 8).count
        binarized = [band_threshold(median_filter(s, 1), 60) for s in stack.slices]
        zz = zigzag_h0(binarized)
        assert zz.spanning_all() == n_structure == 2
