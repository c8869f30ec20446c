"""Rendering: red cell outlines over the source image, centroid markers,
transect rules, and deterministic SVG histogram/KDE plots.

SVG was chosen over raster plotting so the artifacts are dependency-free,
diffable, and byte-identical across runs for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, SizeError
from .image import GrayImage, LabelMask
from .pngio import encode_png
from .stats import Histogram, KdeCurve

OUTLINE_RGB = (255, 0, 0)
MARKER_RADIUS = 3


@dataclass(frozen=True)
class RgbImage:
    """8-bit three-channel raster, (height, width, 3) uint8."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise FormatError(f"RgbImage expects (H, W, 3), got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def extract_outlines(mask: LabelMask) -> set[tuple[int, int, int]]:
    """Outline pixels: cell pixels with a 4-neighbor of another label or off-image."""
    lab = mask.labels
    h, w = lab.shape
    padded = np.full((h + 2, w + 2), -1, dtype=np.int64)
    padded[1:-1, 1:-1] = lab
    differs = np.zeros((h, w), dtype=bool)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        differs |= padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] != lab
    ys, xs = np.nonzero(differs & (lab > 0))
    return {(int(x), int(y), int(lab[y, x])) for x, y in zip(xs, ys)}


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def render_overlay(
    img: GrayImage,
    outlines,
    markers=None,
    lines=None,
    horizontal_lines=None,
) -> RgbImage:
    """Replicate the grayscale to RGB and paint annotations.

    Outline pixels become pure red, centroid markers black filled circles of
    radius 3 (centers rounded half-up), transect rules 1-px black lines.
    Unpainted pixels keep their gray value exactly in all three channels.
    """
    h, w = img.shape
    gray = np.clip(np.rint(np.clip(img.data, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2).copy()

    for x in lines or ():
        if not 0 <= x < w:
            raise SizeError(f"transect line x={x} outside image width {w}")
        rgb[:, x, :] = 0
    for y in horizontal_lines or ():
        if not 0 <= y < h:
            raise SizeError(f"transect line y={y} outside image height {h}")
        rgb[y, :, :] = 0

    if markers:
        offsets = [
            (dx, dy)
            for dy in range(-MARKER_RADIUS, MARKER_RADIUS + 1)
            for dx in range(-MARKER_RADIUS, MARKER_RADIUS + 1)
            if dx * dx + dy * dy <= MARKER_RADIUS * MARKER_RADIUS
        ]
        for cx, cy in markers:
            px, py = _round_half_up(cx), _round_half_up(cy)
            for dx, dy in offsets:
                x, y = px + dx, py + dy
                if 0 <= x < w and 0 <= y < h:
                    rgb[y, x, :] = 0

    for x, y, _label in outlines:
        if not (0 <= x < w and 0 <= y < h):
            raise SizeError(f"outline pixel ({x}, {y}) outside {w}x{h} image")
        rgb[y, x] = OUTLINE_RGB

    return RgbImage(rgb)


def save_rgb(img: RgbImage, path) -> None:
    Path(path).write_bytes(encode_png(img.data))


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------

_W, _H = 480, 360
_ML, _MR, _MT, _MB = 56, 16, 34, 44  # margins


def _fmt(v: float) -> str:
    return format(v, ".6g")


def _xml_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plot(hist: Histogram, kde: KdeCurve | None, title: str, path) -> None:
    """Write a density-normalized histogram with an optional KDE overlay.

    Bars are gray and scaled to density (count / (n * bin_width)) so the red
    KDE polyline shares the vertical axis. Output bytes are deterministic for
    fixed inputs.
    """
    edges = list(hist.bin_edges)
    counts = list(hist.counts)
    if len(edges) != len(counts) + 1:
        raise FormatError("histogram edges/counts length mismatch")
    densities = [
        c / (hist.n * (edges[i + 1] - edges[i])) if edges[i + 1] > edges[i] else 0.0
        for i, c in enumerate(counts)
    ]
    x_lo, x_hi = edges[0], edges[-1]
    y_hi = max(densities, default=0.0)
    if kde is not None:
        x_lo = min(x_lo, kde.grid[0])
        x_hi = max(x_hi, kde.grid[-1])
        y_hi = max(y_hi, max(kde.density))
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= 0:
        y_hi = 1.0
    y_hi *= 1.05

    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB

    def sx(v: float) -> float:
        return _ML + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return _MT + plot_h - v / y_hi * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" font-family="sans-serif" font-size="14" '
        f'text-anchor="middle">{_xml_escape(title)}</text>',
    ]
    for i, d in enumerate(densities):
        if d <= 0:
            continue
        x0, x1 = sx(edges[i]), sx(edges[i + 1])
        y0 = sy(d)
        parts.append(
            f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" '
            f'height="{_MT + plot_h - y0:.2f}" fill="rgb(180,180,180)" '
            f'stroke="rgb(120,120,120)" stroke-width="0.5"/>'
        )
    if kde is not None:
        pts = " ".join(f"{sx(g):.2f},{sy(d):.2f}" for g, d in zip(kde.grid, kde.density))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="red" stroke-width="1.5"/>'
        )
    # axes
    parts.append(
        f'<line x1="{_ML}" y1="{_MT + plot_h}" x2="{_ML + plot_w}" y2="{_MT + plot_h}" '
        f'stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + plot_h}" '
        f'stroke="black" stroke-width="1"/>'
    )
    for i in range(5):
        xv = x_lo + (x_hi - x_lo) * i / 4
        xp = sx(xv)
        parts.append(
            f'<line x1="{xp:.2f}" y1="{_MT + plot_h}" x2="{xp:.2f}" '
            f'y2="{_MT + plot_h + 4}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{xp:.2f}" y="{_MT + plot_h + 18}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle">{_fmt(xv)}</text>'
        )
        yv = y_hi * i / 4
        yp = sy(yv)
        parts.append(
            f'<line x1="{_ML - 4}" y1="{yp:.2f}" x2="{_ML}" y2="{yp:.2f}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{yp + 4:.2f}" font-family="sans-serif" '
            f'font-size="11" text-anchor="end">{_fmt(yv)}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.1f}" y="{_H - 8}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle">value</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
