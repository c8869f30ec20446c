"""Segmentation backends: the contract, a native classical backend, and
ingestion of externally produced exchange masks.

A backend is anything with a ``name`` string and a ``run(img) -> LabelMask``
method that is deterministic for identical inputs and configuration. The
native backend is a classical pipeline (threshold the boundary network, close
it, label the interior complement) that needs no trained model; external
masks arrive through the 16-bit PGM + sidecar exchange format.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
from scipy import ndimage

from .errors import ConfigError, FoilmetricError, FormatError, SegmentationError
from .image import GrayImage, LabelMask, MaskMetadata, load_label_mask
from .preproc import AUTO, PreprocConfig, otsu_threshold, preprocess

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_FULL = np.ones((3, 3), dtype=bool)


@runtime_checkable
class SegmentationBackend(Protocol):
    name: str

    def run(self, img: GrayImage) -> LabelMask: ...


@dataclass(frozen=True)
class NativeSegConfig:
    """Knobs of the classical backend.

    The preprocessing output is thresholded into a boundary map; polarity is
    inferred: when the gradient/suppression stages ran, edges are bright and
    the boundary is the high side, otherwise boundary lines are the dark side
    of the raw (possibly smoothed) image.

    ``expand_into_boundary`` assigns each thresholded boundary pixel to the
    nearest surviving cell after labeling. Thresholding a diffused line
    removes a band several pixels wide around the true boundary; without the
    reclaim step every cell span is biased low by the band width, which is
    the dominant error of the classical route.
    """

    preproc: PreprocConfig = field(default_factory=PreprocConfig)
    closing_iterations: int = 1
    connectivity: int = 4
    min_area_px: int = 16
    exclude_border_cells: bool = True
    expand_into_boundary: bool = True
    watershed_split: bool = False
    watershed_min_peak_separation: float = 10.0

    def __post_init__(self):
        if self.min_area_px < 1:
            raise ConfigError("min_area_px must be >= 1")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if self.closing_iterations < 0:
            raise ConfigError("closing_iterations must be >= 0")
        if self.watershed_min_peak_separation <= 0:
            raise ConfigError("watershed_min_peak_separation must be > 0")


def _binary_dilate(mask: np.ndarray, iterations: int) -> np.ndarray:
    out = mask
    for _ in range(iterations):
        padded = np.pad(out, 1, mode="constant", constant_values=False)
        h, w = out.shape
        acc = np.zeros_like(out)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc |= padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        out = acc
    return out


def _binary_erode(mask: np.ndarray, iterations: int) -> np.ndarray:
    # off-image counts as boundary so closing stays extensive at the frame
    out = mask
    for _ in range(iterations):
        padded = np.pad(out, 1, mode="constant", constant_values=True)
        h, w = out.shape
        acc = np.ones_like(out)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc &= padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        out = acc
    return out


def _close_boundary(boundary: np.ndarray, iterations: int) -> np.ndarray:
    if iterations == 0:
        return boundary
    return _binary_erode(_binary_dilate(boundary, iterations), iterations)


def _select_peaks(dist: np.ndarray, min_sep: float) -> list[tuple[int, int]]:
    """Greedy max-first local maxima of the distance map, min_sep apart."""
    localmax = ndimage.maximum_filter(dist, size=3, mode="constant", cval=0.0)
    ys, xs = np.nonzero((dist == localmax) & (dist > 0))
    if ys.size == 0:
        return []
    vals = dist[ys, xs]
    order = np.lexsort((xs, ys, -vals))
    chosen: list[tuple[int, int]] = []
    min_sep_sq = min_sep * min_sep
    for i in order:
        y, x = int(ys[i]), int(xs[i])
        if all((y - cy) ** 2 + (x - cx) ** 2 >= min_sep_sq for cy, cx in chosen):
            chosen.append((y, x))
    return chosen


def _flood_watershed(region: np.ndarray, dist: np.ndarray, markers) -> np.ndarray:
    """Deterministic marker flood over descending distance; 4-connected."""
    out = np.zeros(region.shape, dtype=np.int32)
    heap = []
    counter = 0
    for mid, (y, x) in enumerate(markers, start=1):
        out[y, x] = mid
        heapq.heappush(heap, (-dist[y, x], counter, y, x))
        counter += 1
    h, w = region.shape
    while heap:
        _, _, y, x = heapq.heappop(heap)
        mid = out[y, x]
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and region[ny, nx] and out[ny, nx] == 0:
                out[ny, nx] = mid
                heapq.heappush(heap, (-dist[ny, nx], counter, ny, nx))
                counter += 1
    return out


def native_segment(img: GrayImage, config: NativeSegConfig | None = None) -> LabelMask:
    """Classical boundary-threshold segmentation; an empty result is valid."""
    config = config or NativeSegConfig()
    pre = preprocess(img, config.preproc)
    thr = config.preproc.binarize_threshold
    t = otsu_threshold(pre.data) if thr == AUTO else float(thr)
    if config.preproc.gradient_enabled:
        boundary = pre.data >= t
    else:
        boundary = pre.data <= t
    boundary = _close_boundary(boundary, config.closing_iterations)
    interiors = ~boundary

    structure = _CROSS if config.connectivity == 4 else _FULL
    labeled, n = ndimage.label(interiors, structure=structure)
    if n == 0:
        return LabelMask.canonical(labeled)

    areas = np.bincount(labeled.ravel(), minlength=n + 1)
    keep = areas >= config.min_area_px
    keep[0] = False
    if config.exclude_border_cells:
        border = np.unique(
            np.concatenate(
                [labeled[0, :], labeled[-1, :], labeled[:, 0], labeled[:, -1]]
            )
        )
        keep[border] = False
    labeled = np.where(keep[labeled], labeled, 0)

    if config.watershed_split:
        labeled = _split_merged(labeled, config.watershed_min_peak_separation)
    if config.expand_into_boundary and labeled.any():
        labeled = _expand_labels(labeled, boundary)
    return LabelMask.canonical(labeled)


def _expand_labels(labeled: np.ndarray, band: np.ndarray) -> np.ndarray:
    """Assign boundary-band pixels to the nearest surviving cell."""
    unlabeled = labeled == 0
    _, (iy, ix) = ndimage.distance_transform_edt(unlabeled, return_indices=True)
    nearest = labeled[iy, ix]
    out = labeled.copy()
    claim = unlabeled & band
    out[claim] = nearest[claim]
    return out


def _split_merged(labeled: np.ndarray, min_sep: float) -> np.ndarray:
    out = np.zeros_like(labeled)
    next_id = 1
    for k in np.unique(labeled):
        if k == 0:
            continue
        region = labeled == k
        dist = ndimage.distance_transform_edt(region)
        peaks = _select_peaks(dist, min_sep)
        if len(peaks) < 2:
            out[region] = next_id
            next_id += 1
            continue
        parts = _flood_watershed(region, dist, peaks)
        for pid in range(1, len(peaks) + 1):
            out[parts == pid] = next_id
            next_id += 1
    return out


class NativeBackend:
    """Classical backend wrapping :func:`native_segment`."""

    name = "native"

    def __init__(self, config: NativeSegConfig | None = None):
        self.config = config or NativeSegConfig()

    def run(self, img: GrayImage) -> LabelMask:
        return native_segment(img, self.config)


class FixedMaskBackend:
    """Returns a pre-computed mask; used as an oracle in tests and pipelines."""

    def __init__(self, mask: LabelMask, name: str = "fixed"):
        self.mask = mask
        self.name = name

    def run(self, img: GrayImage) -> LabelMask:
        if img.shape != self.mask.shape:
            raise SegmentationError(
                f"fixed mask is {self.mask.shape}, image is {img.shape}", self.name
            )
        return self.mask


class ExternalMaskBackend:
    """Serves a mask produced by an external tool in the exchange format."""

    def __init__(self, path):
        self.path = path
        mask, meta = load_label_mask(path)
        self._mask = mask
        self._meta = meta
        self.name = meta.backend_name or "external"

    def run(self, img: GrayImage) -> LabelMask:
        if (self._mask.width, self._mask.height) != (img.width, img.height):
            raise FormatError(
                f"external mask is {self._mask.width}x{self._mask.height}, "
                f"image is {img.width}x{img.height}"
            )
        return self._mask


def ingest_external_mask(path, expected: tuple[int, int]) -> tuple[LabelMask, MaskMetadata]:
    """Load an exchange mask and verify it against expected (width, height)."""
    mask, meta = load_label_mask(path)
    if (mask.width, mask.height) != tuple(expected):
        raise FormatError(
            f"mask {path} is {mask.width}x{mask.height}, expected "
            f"{expected[0]}x{expected[1]}"
        )
    return mask, meta


def segment(
    img: GrayImage,
    backend: SegmentationBackend,
    *,
    px_per_unit: float | None = None,
    source_image: str = "",
) -> tuple[LabelMask, MaskMetadata]:
    """Run a backend and wrap the result with canonical labels and metadata."""
    try:
        raw = backend.run(img)
    except SegmentationError:
        raise
    except FoilmetricError as exc:
        raise SegmentationError(
            f"backend '{backend.name}' failed: {exc}", backend.name, details=str(exc)
        ) from exc
    if raw.shape != img.shape:
        raise SegmentationError(
            f"backend '{backend.name}' returned a {raw.shape} mask for a "
            f"{img.shape} image",
            backend.name,
        )
    mask = LabelMask.canonical(raw.labels)
    meta = MaskMetadata(
        width=mask.width,
        height=mask.height,
        backend_name=backend.name,
        n_cells=mask.n_cells,
        px_per_unit=px_per_unit,
        source_image=source_image,
    )
    return mask, meta


def greedy_iou_match(
    pred: LabelMask, truth: LabelMask, min_iou: float = 0.5
) -> list[tuple[int, int, float]]:
    """Greedy one-to-one assignment of predicted to truth cells by IoU.

    Candidate pairs are every (pred, truth) label pair with non-empty
    intersection, taken in descending IoU order (label order on ties).
    """
    if pred.shape != truth.shape:
        raise FormatError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    np_, nt = pred.n_cells, truth.n_cells
    joint = np.bincount(
        pred.labels.ravel().astype(np.int64) * (nt + 1) + truth.labels.ravel(),
        minlength=(np_ + 1) * (nt + 1),
    ).reshape(np_ + 1, nt + 1)
    area_p = joint.sum(axis=1)
    area_t = joint.sum(axis=0)
    pairs = []
    pk, tk = np.nonzero(joint[1:, 1:])
    for i in range(pk.size):
        p, t = int(pk[i]) + 1, int(tk[i]) + 1
        inter = joint[p, t]
        iou = inter / (area_p[p] + area_t[t] - inter)
        if iou >= min_iou:
            pairs.append((-iou, p, t))
    pairs.sort()
    used_p: set[int] = set()
    used_t: set[int] = set()
    matches = []
    for neg_iou, p, t in pairs:
        if p in used_p or t in used_t:
            continue
        used_p.add(p)
        used_t.add(t)
        matches.append((p, t, -neg_iou))
    return matches
