"""Minimal deterministic PNG codec.

Supports exactly what the pipeline needs: writing 8-bit grayscale and 8-bit
RGB images, and reading 8-bit grayscale / gray+alpha / RGB / RGBA, interlace
method 0 only. Encoded output is byte-stable: fixed zlib level, filter type 0
on every scanline, a single IDAT chunk, no ancillary chunks.

Palette images, 16-bit samples, and Adam7 interlacing are rejected with
:class:`~foilmetric.errors.FormatError`.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import FormatError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# Samples per pixel by PNG color type.
_CHANNELS = {0: 1, 2: 3, 4: 2, 6: 4}

_ZLIB_LEVEL = 6


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode a (H, W) or (H, W, 3) uint8 array as a PNG byte string."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        raise FormatError(f"PNG encoder expects uint8 samples, got {arr.dtype}")
    if arr.ndim == 2:
        color_type = 0
    elif arr.ndim == 3 and arr.shape[2] == 3:
        color_type = 2
    else:
        raise FormatError(f"PNG encoder expects (H, W) or (H, W, 3), got {arr.shape}")
    height, width = arr.shape[:2]
    if width < 1 or height < 1:
        raise FormatError("zero-dimension image")

    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    rows = arr.reshape(height, -1)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(height))
    idat = zlib.compress(raw, _ZLIB_LEVEL)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def _unfilter(raw: bytes, width: int, height: int, channels: int) -> np.ndarray:
    stride = width * channels
    if len(raw) < height * (stride + 1):
        raise FormatError("truncated PNG pixel data")
    out = np.zeros((height, stride), dtype=np.uint8)
    pos = 0
    prev = np.zeros(stride, dtype=np.int32)
    for y in range(height):
        ftype = raw[pos]
        pos += 1
        line = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=pos).astype(np.int32)
        pos += stride
        if ftype == 0:
            cur = line
        elif ftype == 1:  # Sub
            cur = line.copy()
            for i in range(channels, stride):
                cur[i] = (cur[i] + cur[i - channels]) & 0xFF
        elif ftype == 2:  # Up
            cur = (line + prev) & 0xFF
        elif ftype == 3:  # Average
            cur = line.copy()
            for i in range(stride):
                left = cur[i - channels] if i >= channels else 0
                cur[i] = (cur[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            cur = line.copy()
            for i in range(stride):
                a = cur[i - channels] if i >= channels else 0
                b = prev[i]
                c = prev[i - channels] if i >= channels else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                cur[i] = (cur[i] + pred) & 0xFF
        else:
            raise FormatError(f"unknown PNG filter type {ftype}")
        out[y] = cur.astype(np.uint8)
        prev = cur
    return out.reshape(height, width, channels)


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a (H, W, channels) uint8 array."""
    if len(data) < len(PNG_SIGNATURE) or data[: len(PNG_SIGNATURE)] != PNG_SIGNATURE:
        raise FormatError("not a PNG file (bad signature)")
    pos = len(PNG_SIGNATURE)
    width = height = None
    color_type = None
    idat = bytearray()
    seen_iend = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise FormatError("truncated PNG chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        if len(payload) < length or pos + 12 + length > len(data):
            raise FormatError("truncated PNG chunk payload")
        (crc,) = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])
        if crc != (zlib.crc32(tag + payload) & 0xFFFFFFFF):
            raise FormatError(f"corrupt PNG chunk {tag!r} (bad CRC)")
        pos += 12 + length
        if tag == b"IHDR":
            width, height, depth, color_type, comp, filt, interlace = struct.unpack(
                ">IIBBBBB", payload
            )
            if depth != 8:
                raise FormatError(f"unsupported PNG bit depth {depth} (8-bit only)")
            if color_type not in _CHANNELS:
                raise FormatError(f"unsupported PNG color type {color_type}")
            if interlace != 0:
                raise FormatError("interlaced PNG not supported")
            if comp != 0 or filt != 0:
                raise FormatError("unsupported PNG compression/filter method")
            if width < 1 or height < 1:
                raise FormatError("zero-dimension image")
        elif tag == b"IDAT":
            idat.extend(payload)
        elif tag == b"IEND":
            seen_iend = True
            break
    if width is None:
        raise FormatError("PNG missing IHDR")
    if not seen_iend:
        raise FormatError("truncated PNG (no IEND)")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise FormatError(f"corrupt PNG pixel stream: {exc}") from exc
    return _unfilter(raw, width, height, _CHANNELS[color_type])
