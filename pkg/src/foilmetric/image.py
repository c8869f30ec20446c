"""Raster containers and file I/O shared by the whole pipeline.

Two raster types flow through every stage: :class:`GrayImage` (floating-point
intensities, nominally in [0, 1] after load; gradient stages relax the range
to signed values) and :class:`LabelMask` (non-negative integer cell labels,
0 = background). Both are immutable after construction.

File formats:

* grayscale input/output: 8-bit PNG and binary PGM (P5),
* label-mask exchange: 16-bit binary PGM (P5, maxval 65535, big-endian
  samples) plus a JSON sidecar ``<name>.mask.json``. The exchange format is
  deliberately trivial so any external segmentation tool can produce it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapacityError, FormatError
from .pngio import PNG_SIGNATURE, decode_png, encode_png

MAX_EXCHANGE_LABEL = 65535


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayImage:
    """2-D scalar raster; ``data`` is (height, width) float64, all finite."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise FormatError(f"GrayImage expects a 2-D array, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FormatError("zero-dimension image")
        if not np.all(np.isfinite(arr)):
            raise FormatError("GrayImage intensities must be finite")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class LabelMask:
    """2-D integer raster of cell identities; canonical labels {0..n_cells}.

    ``labels`` is (height, width) int32. Canonical means label values are
    dense: every k in 1..n_cells appears at least once and nothing above
    n_cells appears. Use :meth:`canonical` to build one from arbitrary
    non-negative integers.
    """

    labels: np.ndarray
    n_cells: int = field(default=-1)

    def __post_init__(self):
        arr = np.array(self.labels, dtype=np.int32)
        if arr.ndim != 2:
            raise FormatError(f"LabelMask expects a 2-D array, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FormatError("zero-dimension mask")
        if arr.min(initial=0) < 0:
            raise FormatError("labels must be non-negative")
        present = np.unique(arr)
        nonzero = present[present > 0]
        n = int(nonzero.size)
        if self.n_cells == -1:
            object.__setattr__(self, "n_cells", n)
        elif self.n_cells != n:
            raise FormatError(f"n_cells={self.n_cells} but {n} distinct non-zero labels found")
        if n and (nonzero[0] != 1 or nonzero[-1] != n):
            raise FormatError("labels are not canonical (gaps present); use LabelMask.canonical")
        object.__setattr__(self, "labels", _frozen(arr))

    @classmethod
    def canonical(cls, raw: np.ndarray) -> "LabelMask":
        """Densely renumber arbitrary non-negative labels in first-pixel scan order."""
        arr = np.asarray(raw)
        if arr.ndim != 2:
            raise FormatError(f"LabelMask expects a 2-D array, got ndim={arr.ndim}")
        if np.min(arr, initial=0) < 0:
            raise FormatError("labels must be non-negative")
        flat = arr.ravel()
        # first occurrence index of each distinct value, in scan order
        values, first = np.unique(flat, return_index=True)
        order = np.argsort(first, kind="stable")
        remap = np.zeros(int(values.max(initial=0)) + 1, dtype=np.int32)
        next_id = 1
        for idx in order:
            v = int(values[idx])
            if v == 0:
                continue
            remap[v] = next_id
            next_id += 1
        return cls(remap[arr.astype(np.int64)])

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class MaskMetadata:
    """Sidecar record accompanying a label mask on disk."""

    width: int
    height: int
    backend_name: str = ""
    n_cells: int = 0
    px_per_unit: float | None = None
    source_image: str = ""
    extra: dict = field(default_factory=dict)

    def validate_against(self, mask: LabelMask) -> None:
        if (self.width, self.height) != (mask.width, mask.height):
            raise FormatError(
                f"sidecar says {self.width}x{self.height}, mask is {mask.width}x{mask.height}"
            )

    def to_json_dict(self) -> dict:
        d = {
            "width": self.width,
            "height": self.height,
            "backend_name": self.backend_name,
            "n_cells": self.n_cells,
            "px_per_unit": self.px_per_unit,
            "source_image": self.source_image,
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "MaskMetadata":
        known = {"width", "height", "backend_name", "n_cells", "px_per_unit", "source_image"}
        try:
            return cls(
                width=int(d["width"]),
                height=int(d["height"]),
                backend_name=str(d.get("backend_name", "")),
                n_cells=int(d.get("n_cells", 0)),
                px_per_unit=(None if d.get("px_per_unit") is None else float(d["px_per_unit"])),
                source_image=str(d.get("source_image", "")),
                extra={k: v for k, v in d.items() if k not in known},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad mask sidecar: {exc}") from exc


# ---------------------------------------------------------------------------
# PGM (P5) codec
# ---------------------------------------------------------------------------


def _read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Parse binary PGM; returns (array (H, W) of uint16/uint8, maxval)."""
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM (P5) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError("truncated PGM header")
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tok = data[start:pos]
            if not tok.isdigit():
                raise FormatError(f"bad PGM header token {tok!r}")
            fields.append(int(tok))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError("zero-dimension image")
    if maxval < 1 or maxval > 65535:
        raise FormatError(f"bad PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height
    expected = count * dtype.itemsize
    body = data[pos : pos + expected]
    if len(body) < expected:
        raise FormatError("truncated PGM pixel data")
    arr = np.frombuffer(body, dtype=dtype, count=count).reshape(height, width)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def _write_pgm(arr: np.ndarray, maxval: int) -> bytes:
    height, width = arr.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        body = arr.astype(">u2").tobytes()
    else:
        body = arr.astype(np.uint8).tobytes()
    return header + body


# ---------------------------------------------------------------------------
# Grayscale image I/O
# ---------------------------------------------------------------------------


def load_gray(path) -> GrayImage:
    """Load an 8-bit grayscale PNG or PGM (P5) and normalize to [0, 1].

    Color PNGs are reduced by the unweighted channel mean; alpha is ignored.
    """
    data = Path(path).read_bytes()
    if data[: len(PNG_SIGNATURE)] == PNG_SIGNATURE:
        arr = decode_png(data)
        channels = arr.shape[2]
        if channels == 1:
            gray = arr[:, :, 0].astype(np.float64)
        elif channels == 2:  # gray + alpha
            gray = arr[:, :, 0].astype(np.float64)
        else:  # RGB / RGBA: unweighted channel mean
            gray = arr[:, :, :3].astype(np.float64).mean(axis=2)
        return GrayImage(gray / 255.0)
    if data[:2] == b"P5":
        arr, maxval = _read_pgm(data)
        if maxval > 255:
            raise FormatError("16-bit PGM is the mask exchange format, not a grayscale input")
        return GrayImage(arr.astype(np.float64) / float(maxval))
    raise FormatError(f"{path}: unrecognized image format (PNG or PGM P5 expected)")


def save_gray(img: GrayImage, path) -> None:
    """Quantize to 8 bits (round to nearest, clamped to [0, 1]) and write PNG or PGM."""
    q = np.clip(np.rint(np.clip(img.data, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        path.write_bytes(_write_pgm(q, 255))
    else:
        path.write_bytes(encode_png(q))


# ---------------------------------------------------------------------------
# Label-mask exchange I/O
# ---------------------------------------------------------------------------


def sidecar_path(mask_path) -> Path:
    p = Path(mask_path)
    return p.with_suffix(".mask.json") if p.suffix == ".pgm" else Path(str(p) + ".mask.json")


def save_label_mask(mask: LabelMask, meta: MaskMetadata, path) -> None:
    """Write the 16-bit PGM exchange mask plus its JSON sidecar."""
    if mask.n_cells > MAX_EXCHANGE_LABEL:
        raise CapacityError(
            f"{mask.n_cells} cells exceed the 16-bit exchange capacity ({MAX_EXCHANGE_LABEL})"
        )
    meta.validate_against(mask)
    path = Path(path)
    path.write_bytes(_write_pgm(mask.labels.astype(np.uint16), 65535))
    payload = json.dumps(meta.to_json_dict(), indent=2, sort_keys=True) + "\n"
    sidecar_path(path).write_text(payload)


def load_label_mask(path) -> tuple[LabelMask, MaskMetadata]:
    """Load an exchange mask; labels are canonicalized, sidecar is required."""
    path = Path(path)
    arr, _maxval = _read_pgm(path.read_bytes())
    side = sidecar_path(path)
    if not side.exists():
        raise FormatError(f"missing mask sidecar {side}")
    try:
        meta = MaskMetadata.from_json_dict(json.loads(side.read_text()))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad mask sidecar {side}: {exc}") from exc
    mask = LabelMask.canonical(arr.astype(np.int32))
    meta.validate_against(mask)
    if meta.n_cells != mask.n_cells:
        meta = MaskMetadata(
            width=meta.width,
            height=meta.height,
            backend_name=meta.backend_name,
            n_cells=mask.n_cells,
            px_per_unit=meta.px_per_unit,
            source_image=meta.source_image,
            extra=meta.extra,
        )
    return mask, meta
