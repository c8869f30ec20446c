"""Overlay rendering and SVG plot emission."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from foilmetric.errors import SizeError
from foilmetric.image import GrayImage, LabelMask
from foilmetric.report import (
    RgbImage,
    extract_outlines,
    render_overlay,
    save_rgb,
    emit_plot,
)
from foilmetric.pngio import decode_png
from foilmetric.stats import Histogram, gaussian_kde, knuth_histogram

from conftest import mask_from_rows, random_mask


class TestExtractOutlines:
    def test_3x3_cell_has_8_outline_pixels(self):
        rows = np.zeros((7, 7), dtype=int)
        rows[2:5, 2:5] = 1
        outlines = extract_outlines(LabelMask(rows))
        assert len(outlines) == 8
        assert (3, 3, 1) not in outlines  # center excluded

    def test_single_pixel_cell(self):
        mask = mask_from_rows([[0, 0], [0, 1]])
        assert extract_outlines(mask) == {(1, 1, 1)}

    def test_full_image_cell_outline_is_border(self):
        mask = LabelMask(np.ones((4, 5), dtype=np.int32))
        outlines = extract_outlines(mask)
        expected = {
            (x, y, 1)
            for y in range(4)
            for x in range(5)
            if x in (0, 4) or y in (0, 3)
        }
        assert outlines == expected

    def test_outline_subset_and_nonempty_per_cell(self, rng):
        for _ in range(10):
            mask = random_mask(rng, 24, 24, max_labels=5)
            outlines = extract_outlines(mask)
            for x, y, k in outlines:
                assert mask.labels[y, x] == k
            covered = {k for _, _, k in outlines}
            assert covered == set(range(1, mask.n_cells + 1))

    def test_adjacent_cells_both_outlined(self):
        mask = mask_from_rows([[1, 2]])
        assert extract_outlines(mask) == {(0, 0, 1), (1, 0, 2)}


class TestRenderOverlay:
    def test_empty_outline_is_gray_replica(self, rng):
        img = GrayImage(rng.random((5, 6)))
        out = render_overlay(img, set())
        gray = np.rint(img.data * 255).astype(np.uint8)
        for c in range(3):
            assert np.array_equal(out.data[:, :, c], gray)

    def test_single_red_pixel(self):
        img = GrayImage(np.full((8, 8), 0.5))
        out = render_overlay(img, {(5, 5, 1)})
        assert tuple(out.data[5, 5]) == (255, 0, 0)
        assert tuple(out.data[4, 5]) == (128, 128, 128)

    def test_marker_rounding_and_shape(self):
        img = GrayImage(np.ones((30, 30)))
        out = render_overlay(img, set(), markers=[(10.4, 20.6)])
        assert tuple(out.data[21, 10]) == (0, 0, 0)  # center at (10, 21)
        assert tuple(out.data[21, 13]) == (0, 0, 0)  # radius 3 included
        assert tuple(out.data[21, 14]) == (255, 255, 255)
        assert tuple(out.data[24, 13]) == (255, 255, 255)  # corner outside circle

    def test_transect_rules(self):
        img = GrayImage(np.ones((4, 9)))
        out = render_overlay(img, set(), lines=[3])
        assert np.all(out.data[:, 3, :] == 0)
        assert np.all(out.data[:, 2, :] == 255)

    def test_non_destructive_off_painted_pixels(self, rng):
        img = GrayImage(rng.random((12, 12)))
        outlines = {(2, 3, 1), (7, 7, 1)}
        out = render_overlay(img, outlines, markers=[(10.0, 2.0)], lines=[5])
        gray = np.rint(np.clip(img.data, 0, 1) * 255).astype(np.uint8)
        painted = np.zeros((12, 12), dtype=bool)
        painted[:, 5] = True
        painted[3, 2] = painted[7, 7] = True
        yy, xx = np.mgrid[0:12, 0:12]
        painted |= (xx - 10) ** 2 + (yy - 2) ** 2 <= 9
        for c in range(3):
            assert np.array_equal(out.data[:, :, c][~painted], gray[~painted])

    def test_outline_out_of_bounds(self):
        img = GrayImage(np.ones((4, 4)))
        with pytest.raises(SizeError):
            render_overlay(img, {(9, 9, 1)})

    def test_save_rgb_roundtrip(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(6, 7, 3)).astype(np.uint8)
        p = tmp_path / "o.png"
        save_rgb(RgbImage(arr), p)
        assert np.array_equal(decode_png(p.read_bytes()), arr)


class TestEmitPlot:
    def test_single_bin_valid_xml(self, tmp_path):
        hist = Histogram(bin_edges=(0.0, 1.0), counts=(5,), n=5)
        p = tmp_path / "h.svg"
        emit_plot(hist, None, "one bin", p)
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")
        rects = [e for e in root.iter() if e.tag.endswith("rect")]
        assert len(rects) == 2  # background + one bar

    def test_byte_deterministic(self, tmp_path, rng):
        data = rng.normal(size=120)
        hist = knuth_histogram(data)
        kde = gaussian_kde(data)
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_plot(hist, kde, "fixture", p1)
        emit_plot(hist, kde, "fixture", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_polyline_vertex_count(self, tmp_path, rng):
        data = rng.normal(size=60)
        hist = knuth_histogram(data)
        kde = gaussian_kde(data, grid=np.linspace(-3, 3, 100))
        p = tmp_path / "k.svg"
        emit_plot(hist, kde, "kde", p)
        root = ET.parse(p).getroot()
        polys = [e for e in root.iter() if e.tag.endswith("polyline")]
        assert len(polys) == 1
        assert len(polys[0].attrib["points"].split()) == 100

    def test_title_escaped(self, tmp_path):
        hist = Histogram(bin_edges=(0.0, 1.0), counts=(1,), n=1)
        p = tmp_path / "t.svg"
        emit_plot(hist, None, "a < b & c", p)
        ET.parse(p)  # must stay well-formed
