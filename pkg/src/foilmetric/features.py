"""Per-cell geometric measurement.

Coordinate convention used everywhere: x is the column index increasing
rightward, y the row index increasing downward, pixel centers at integer
coordinates. For each cell the horizontal span ``dx`` is the Euclidean
distance between the member pixels with minimal and maximal x (ties broken
toward minimal y); ``dy`` is the vertical analog with ties toward minimal x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnknownLabelError
from .image import LabelMask, MaskMetadata


@dataclass(frozen=True)
class CellRecord:
    label: int
    area_px: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]  # (x_min, x_max, y_min, y_max), inclusive
    size_x: int
    size_y: int
    dx: float
    dy: float
    touches_border: bool
    area_phys: float | None = None
    dx_phys: float | None = None
    dy_phys: float | None = None


def _check_label(mask: LabelMask, k: int) -> None:
    if not 1 <= k <= mask.n_cells:
        raise UnknownLabelError(f"label {k} not in mask (1..{mask.n_cells})")


def cell_area(mask: LabelMask, k: int) -> int:
    """Number of pixels carrying label k."""
    _check_label(mask, k)
    return int(np.count_nonzero(mask.labels == k))


def cell_centroid(mask: LabelMask, k: int) -> tuple[float, float]:
    """Center of mass of the member pixel coordinates."""
    _check_label(mask, k)
    ys, xs = np.nonzero(mask.labels == k)
    return float(xs.mean()), float(ys.mean())


def cell_bbox(mask: LabelMask, k: int) -> tuple[int, int, int, int]:
    """Inclusive (x_min, x_max, y_min, y_max) of the member pixels."""
    _check_label(mask, k)
    ys, xs = np.nonzero(mask.labels == k)
    return int(xs.min()), int(xs.max()), int(ys.min()), int(ys.max())


def cell_sizes(mask: LabelMask, k: int) -> tuple[int, int]:
    x_min, x_max, y_min, y_max = cell_bbox(mask, k)
    return x_max - x_min + 1, y_max - y_min + 1


def cell_axes(mask: LabelMask, k: int) -> tuple[float, float]:
    """Euclidean distances between the x- and y-extreme member pixels."""
    _check_label(mask, k)
    ys, xs = np.nonzero(mask.labels == k)
    return _axes_from_points(xs, ys)


def _axes_from_points(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    i_xmin = np.lexsort((ys, xs))[0]
    i_xmax = np.lexsort((ys, -xs))[0]
    dx = math.hypot(int(xs[i_xmax]) - int(xs[i_xmin]), int(ys[i_xmax]) - int(ys[i_xmin]))
    i_ymin = np.lexsort((xs, ys))[0]
    i_ymax = np.lexsort((xs, -ys))[0]
    dy = math.hypot(int(xs[i_ymax]) - int(xs[i_ymin]), int(ys[i_ymax]) - int(ys[i_ymin]))
    return dx, dy


def measure_all(mask: LabelMask, meta: MaskMetadata | None = None) -> list[CellRecord]:
    """Measure every cell in one shared pass; records sorted by label.

    Physical mirrors are filled when ``meta.px_per_unit`` is set: lengths are
    divided by px_per_unit, areas by its square.
    """
    labels = mask.labels
    n = mask.n_cells
    if n == 0:
        return []
    h, w = labels.shape
    flat = labels.ravel()
    sel = flat > 0
    lab = flat[sel]
    idx = np.nonzero(sel)[0]
    xs = (idx % w).astype(np.int64)
    ys = (idx // w).astype(np.int64)

    areas = np.bincount(lab, minlength=n + 1)
    sum_x = np.bincount(lab, weights=xs, minlength=n + 1)
    sum_y = np.bincount(lab, weights=ys, minlength=n + 1)

    # group member pixels by label: stable sort keeps scan order within groups
    order = np.argsort(lab, kind="stable")
    gx = xs[order]
    gy = ys[order]
    bounds = np.cumsum(areas)  # group g occupies [bounds[g-1], bounds[g])

    ppu = meta.px_per_unit if meta is not None else None
    records = []
    for k in range(1, n + 1):
        lo, hi = bounds[k - 1], bounds[k]
        mx = gx[lo:hi]
        my = gy[lo:hi]
        x_min, x_max = int(mx.min()), int(mx.max())
        y_min, y_max = int(my.min()), int(my.max())
        dx, dy = _axes_from_points(mx, my)
        size_x = x_max - x_min + 1
        size_y = y_max - y_min + 1
        assert dx >= size_x - 1 - 1e-9 and dy >= size_y - 1 - 1e-9
        area = int(areas[k])
        touches = x_min == 0 or y_min == 0 or x_max == w - 1 or y_max == h - 1
        records.append(
            CellRecord(
                label=k,
                area_px=area,
                centroid=(float(sum_x[k] / area), float(sum_y[k] / area)),
                bbox=(x_min, x_max, y_min, y_max),
                size_x=size_x,
                size_y=size_y,
                dx=dx,
                dy=dy,
                touches_border=touches,
                area_phys=None if ppu is None else area / (ppu * ppu),
                dx_phys=None if ppu is None else dx / ppu,
                dy_phys=None if ppu is None else dy / ppu,
            )
        )
    return records


CSV_COLUMNS = (
    "label,area_px,centroid_x,centroid_y,bbox_xmin,bbox_xmax,bbox_ymin,bbox_ymax,"
    "size_x,size_y,dx,dy,touches_border"
)
CSV_PHYS_COLUMNS = ",area_phys,dx_phys,dy_phys"


def _g6(v: float) -> str:
    return format(v, ".6g")


def write_csv(records: list[CellRecord], path) -> None:
    """Export one row per cell; floats with 6 significant digits.

    Physical columns are appended only when every record carries them.
    """
    physical = bool(records) and all(r.area_phys is not None for r in records)
    lines = [CSV_COLUMNS + (CSV_PHYS_COLUMNS if physical else "")]
    for r in records:
        row = [
            str(r.label),
            str(r.area_px),
            _g6(r.centroid[0]),
            _g6(r.centroid[1]),
            str(r.bbox[0]),
            str(r.bbox[1]),
            str(r.bbox[2]),
            str(r.bbox[3]),
            str(r.size_x),
            str(r.size_y),
            _g6(r.dx),
            _g6(r.dy),
            str(int(r.touches_border)),
        ]
        if physical:
            row += [_g6(r.area_phys), _g6(r.dx_phys), _g6(r.dy_phys)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
