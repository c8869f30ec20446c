"""Label-mask exchange writer and input image loading.

The exchange format consumed downstream is deliberately trivial: a 16-bit
binary PGM (P5, maxval 65535, big-endian samples) holding the label raster,
plus a JSON sidecar ``<name>.mask.json`` with
``{width, height, backend_name, n_cells, px_per_unit, source_image}``.
This module implements it standalone so the adapter has no dependency on the
consumer package.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAX_LABEL = 65535


class ExchangeError(ValueError):
    """Mask cannot be represented in the exchange format."""


def canonicalize(labels: np.ndarray) -> np.ndarray:
    """Densely renumber non-negative labels in first-pixel scan order."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ExchangeError(f"label raster must be 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ExchangeError("empty label raster")
    if arr.min() < 0:
        raise ExchangeError("labels must be non-negative")
    flat = arr.ravel()
    values, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.zeros(int(values.max(initial=0)) + 1, dtype=np.int64)
    next_id = 1
    for idx in order:
        v = int(values[idx])
        if v == 0:
            continue
        remap[v] = next_id
        next_id += 1
    return remap[arr.astype(np.int64)]


def write_exchange_mask(
    labels: np.ndarray,
    out_prefix,
    backend_name: str,
    source_image: str = "",
    px_per_unit: float | None = None,
) -> tuple[Path, Path]:
    """Write ``<prefix>.pgm`` and ``<prefix>.mask.json``; returns both paths."""
    canon = canonicalize(labels)
    n_cells = int(canon.max(initial=0))
    if n_cells > MAX_LABEL:
        raise ExchangeError(f"{n_cells} cells exceed 16-bit exchange capacity")
    h, w = canon.shape
    mask_path = Path(f"{out_prefix}.pgm")
    sidecar = Path(f"{out_prefix}.mask.json")
    header = f"P5\n{w} {h}\n{MAX_LABEL}\n".encode("ascii")
    mask_path.write_bytes(header + canon.astype(">u2").tobytes())
    sidecar.write_text(
        json.dumps(
            {
                "width": w,
                "height": h,
                "backend_name": backend_name,
                "n_cells": n_cells,
                "px_per_unit": px_per_unit,
                "source_image": source_image,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return mask_path, sidecar


def read_exchange_mask(prefix_or_pgm) -> tuple[np.ndarray, dict]:
    """Read back an exchange mask (testing aid)."""
    p = Path(str(prefix_or_pgm))
    if p.suffix != ".pgm":
        p = Path(f"{p}.pgm")
    data = p.read_bytes()
    if not data.startswith(b"P5"):
        raise ExchangeError(f"{p}: not a binary PGM")
    parts = data.split(b"\n", 3)
    w, h = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    arr = np.frombuffer(parts[3], dtype=dtype, count=w * h).reshape(h, w)
    meta = json.loads(p.with_suffix(".mask.json").read_text())
    return arr.astype(np.int64), meta


def load_input_image(path) -> np.ndarray:
    """Load PNG/PGM as float64 grayscale in [0, 1] (unweighted channel mean)."""
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        data = p.read_bytes()
        if not data.startswith(b"P5"):
            raise ExchangeError(f"{p}: not a binary PGM")
        parts = data.split(b"\n", 3)
        w, h = (int(t) for t in parts[1].split())
        maxval = int(parts[2])
        if maxval > 255:
            raise ExchangeError(f"{p}: 16-bit PGM is a mask, not an input image")
        arr = np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)
        return arr.astype(np.float64) / maxval
    from PIL import Image

    with Image.open(p) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[:, :, :3].mean(axis=2)
    return arr.astype(np.float64) / 255.0
