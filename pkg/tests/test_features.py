"""Per-cell measurement against brute-force rescan oracles."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foilmetric.errors import UnknownLabelError
from foilmetric.features import (
    cell_area,
    cell_axes,
    cell_bbox,
    cell_centroid,
    cell_sizes,
    measure_all,
    write_csv,
)
from foilmetric.image import LabelMask, MaskMetadata

from conftest import mask_from_rows, random_mask


def oracle_measure(mask: LabelMask, k: int) -> dict:
    """Independent full-scan measurement of one label with plain loops."""
    pts = [
        (x, y)
        for y in range(mask.height)
        for x in range(mask.width)
        if mask.labels[y, x] == k
    ]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    p_xmin = min(pts, key=lambda p: (p[0], p[1]))
    p_xmax = min(pts, key=lambda p: (-p[0], p[1]))
    p_ymin = min(pts, key=lambda p: (p[1], p[0]))
    p_ymax = min(pts, key=lambda p: (-p[1], p[0]))
    return {
        "area": len(pts),
        "centroid": (sum(xs) / len(pts), sum(ys) / len(pts)),
        "bbox": (min(xs), max(xs), min(ys), max(ys)),
        "dx": math.dist(p_xmin, p_xmax),
        "dy": math.dist(p_ymin, p_ymax),
    }


class TestSingleCellOps:
    def test_rectangle(self):
        rows = np.zeros((20, 10), dtype=int)
        rows[10:13, 2:5] = 1  # x in [2,4], y in [10,12]
        mask = LabelMask(rows)
        assert cell_area(mask, 1) == 9
        assert cell_centroid(mask, 1) == (3.0, 11.0)
        assert cell_bbox(mask, 1) == (2, 4, 10, 12)
        assert cell_sizes(mask, 1) == (3, 3)

    def test_solid_rectangle_area(self):
        rows = np.zeros((8, 8), dtype=int)
        rows[1:5, 2:5] = 1  # 3 wide x 4 tall
        assert cell_area(LabelMask(rows), 1) == 12

    def test_single_pixel(self):
        mask = mask_from_rows([[0, 0], [0, 1]])
        assert cell_area(mask, 1) == 1
        assert cell_sizes(mask, 1) == (1, 1)
        assert cell_axes(mask, 1) == (0.0, 0.0)

    def test_tromino_centroid(self):
        mask = mask_from_rows([[1, 1], [1, 0]])
        assert cell_centroid(mask, 1) == pytest.approx((1 / 3, 1 / 3))

    def test_diagonal_line_sizes(self):
        rows = np.zeros((6, 6), dtype=int)
        for i in range(5):
            rows[i, i] = 1
        assert cell_sizes(LabelMask(rows), 1) == (5, 5)

    def test_horizontal_segment_axes(self):
        rows = np.zeros((3, 13), dtype=int)
        rows[1, 1:12] = 1  # 11 pixels
        dx, dy = cell_axes(LabelMask(rows), 1)
        assert dx == 10.0
        assert dy == 0.0

    def test_three_four_five(self):
        rows = np.zeros((6, 6), dtype=int)
        rows[0, 0] = 1
        rows[4, 3] = 1  # extremes (0,0) and (3,4)
        dx, dy = cell_axes(LabelMask(rows), 1)
        assert dx == 5.0
        assert dy == 5.0

    def test_rhombus_50_spans(self):
        # diamond with inclusive half-diagonals 25: spans measure (50, 50)
        yy, xx = np.mgrid[0:60, 0:60]
        rows = (np.abs(xx - 30) + np.abs(yy - 30) <= 25).astype(int)
        dx, dy = cell_axes(LabelMask(rows), 1)
        assert (dx, dy) == (50.0, 50.0)

    def test_unknown_label(self):
        mask = mask_from_rows([[0, 1]])
        for op in (cell_area, cell_centroid, cell_bbox, cell_axes):
            with pytest.raises(UnknownLabelError):
                op(mask, 7)


class TestMeasureAll:
    def test_two_cells_sorted(self):
        mask = mask_from_rows([[1, 0, 2], [1, 0, 2]])
        records = measure_all(mask)
        assert [r.label for r in records] == [1, 2]

    def test_empty_mask(self):
        assert measure_all(LabelMask(np.zeros((4, 4), dtype=np.int32))) == []

    def test_matches_oracle_on_random_masks(self, rng):
        for _ in range(30):
            mask = random_mask(rng, 32, 32, max_labels=5)
            records = measure_all(mask)
            for r in records:
                o = oracle_measure(mask, r.label)
                assert r.area_px == o["area"]
                assert r.centroid == pytest.approx(o["centroid"], abs=0)
                assert r.bbox == o["bbox"]
                assert r.dx == o["dx"]
                assert r.dy == o["dy"]

    def test_single_ops_agree_with_measure_all(self, rng):
        mask = random_mask(rng, 24, 24, max_labels=4)
        by_label = {r.label: r for r in measure_all(mask)}
        for k, r in by_label.items():
            assert cell_area(mask, k) == r.area_px
            assert cell_centroid(mask, k) == r.centroid
            assert cell_bbox(mask, k) == r.bbox
            assert cell_axes(mask, k) == (r.dx, r.dy)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_partition_conservation(self, seed):
        rng = np.random.default_rng(seed)
        mask = random_mask(rng, 16, 16, max_labels=4)
        records = measure_all(mask)
        background = np.count_nonzero(mask.labels == 0)
        assert sum(r.area_px for r in records) + background == 16 * 16

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_axes_dominate_bbox_span(self, seed):
        rng = np.random.default_rng(seed)
        mask = random_mask(rng, 16, 16, max_labels=4)
        for r in measure_all(mask):
            assert r.dx >= r.size_x - 1 - 1e-9
            assert r.dy >= r.size_y - 1 - 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(0, 7), st.integers(0, 7))
    def test_translation_equivariance(self, seed, sx, sy):
        rng = np.random.default_rng(seed)
        core = rng.integers(0, 4, size=(8, 8))
        big = np.zeros((20, 20), dtype=int)
        big[2:10, 3:11] = core
        shifted = np.zeros((20, 20), dtype=int)
        shifted[2 + sy : 10 + sy, 3 + sx : 11 + sx] = core
        ra = measure_all(LabelMask.canonical(big))
        rb = measure_all(LabelMask.canonical(shifted))
        assert len(ra) == len(rb)
        for a, b in zip(ra, rb):
            assert b.area_px == a.area_px
            assert b.dx == a.dx and b.dy == a.dy
            assert (b.size_x, b.size_y) == (a.size_x, a.size_y)
            assert b.centroid[0] == pytest.approx(a.centroid[0] + sx)
            assert b.centroid[1] == pytest.approx(a.centroid[1] + sy)
            assert b.bbox == (a.bbox[0] + sx, a.bbox[1] + sx, a.bbox[2] + sy, a.bbox[3] + sy)

    def test_touches_border(self):
        mask = mask_from_rows([[1, 0, 0], [0, 0, 0], [0, 0, 2]])
        by_label = {r.label: r for r in measure_all(mask)}
        assert by_label[1].touches_border and by_label[2].touches_border
        inner = mask_from_rows([[0, 0, 0], [0, 1, 0], [0, 0, 0]])
        assert not measure_all(inner)[0].touches_border


class TestPhysicalScaling:
    def test_px_per_unit(self):
        rows = np.zeros((3, 60), dtype=int)
        rows[1, 5:56] = 1  # dx = 50
        meta = MaskMetadata(width=60, height=3, n_cells=1, px_per_unit=10.0)
        r = measure_all(LabelMask(rows), meta)[0]
        assert r.dx == 50.0
        assert r.dx_phys == 5.0
        assert r.area_phys == pytest.approx(51 / 100.0)

    def test_no_unit_no_physical(self):
        mask = mask_from_rows([[0, 1]])
        r = measure_all(mask)[0]
        assert r.dx_phys is None and r.area_phys is None


class TestCsvExport:
    HEADER = (
        "label,area_px,centroid_x,centroid_y,bbox_xmin,bbox_xmax,bbox_ymin,"
        "bbox_ymax,size_x,size_y,dx,dy,touches_border"
    )

    def test_header_and_rows(self, tmp_path):
        mask = mask_from_rows([[1, 0, 2], [1, 0, 0]])
        p = tmp_path / "cells.csv"
        write_csv(measure_all(mask), p)
        lines = p.read_text().strip().split("\n")
        assert lines[0] == self.HEADER
        assert len(lines) == 3
        rows = list(csv.DictReader(p.open()))
        assert rows[0]["label"] == "1"
        assert rows[0]["area_px"] == "2"
        assert rows[0]["touches_border"] == "1"

    def test_physical_columns_when_scaled(self, tmp_path):
        mask = mask_from_rows([[0, 1]])
        meta = MaskMetadata(width=2, height=1, n_cells=1, px_per_unit=2.0)
        p = tmp_path / "cells.csv"
        write_csv(measure_all(mask, meta), p)
        assert p.read_text().splitlines()[0] == self.HEADER + ",area_phys,dx_phys,dy_phys"

    def test_six_significant_digits(self, tmp_path):
        rows = np.zeros((4, 4), dtype=int)
        rows[0, 0] = 1
        rows[1, 1] = 1
        rows[2, 0] = 1
        p = tmp_path / "c.csv"
        write_csv(measure_all(LabelMask(rows)), p)
        data = list(csv.DictReader(p.open()))[0]
        assert data["centroid_x"] == format(1 / 3, ".6g")
