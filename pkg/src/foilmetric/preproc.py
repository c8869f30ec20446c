"""Optional preprocessing chain: denoise, biased gradients, edge thinning.

The chain runs smooth -> directional gradients -> bias combine -> non-maximum
suppression -> directional dilation -> overlay enhancement, every stage
individually skippable through :class:`PreprocConfig`. The gradient stage is
a doubled central difference (no 1/2 normalization; the factor is absorbed by
the bias weights), and non-maximum suppression quantizes the gradient angle
to four sectors and keeps the bias magnitude only at sector-local maxima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SizeError
from .image import GrayImage

AUTO = "auto"

DILATE_NS = "north-south"
DILATE_EW = "east-west"
DILATE_ISO = "isotropic"
DILATE_BOTH = "both"  # one north-south pass and one east-west pass, combined by max

_DIRECTIONS = (DILATE_NS, DILATE_EW, DILATE_ISO, DILATE_BOTH)


@dataclass(frozen=True)
class PreprocConfig:
    """Stage parameters; a stage is skipped when its parameter is inert.

    ``alpha`` weights the y-gradient and ``beta`` the x-gradient. Leaving both
    at None disables the gradient/suppression stages entirely; when enabled,
    at least one weight must be non-zero.
    """

    gauss_sigma: float = 0.0
    alpha: float | None = None
    beta: float | None = None
    overlay_n: int = 1
    binarize_threshold: float | str = AUTO
    dilation_iterations: int = 0
    dilation_direction: str = DILATE_ISO

    def __post_init__(self):
        if self.gauss_sigma < 0:
            raise ConfigError("gauss_sigma must be >= 0")
        if self.overlay_n < 1:
            raise ConfigError("overlay_n must be >= 1")
        if self.dilation_iterations < 0:
            raise ConfigError("dilation_iterations must be >= 0")
        if self.dilation_direction not in _DIRECTIONS:
            raise ConfigError(f"dilation_direction must be one of {_DIRECTIONS}")
        if self.gradient_enabled and self.alpha == 0 and self.beta == 0:
            raise ConfigError("alpha and beta must not both be zero")
        if not isinstance(self.binarize_threshold, str):
            t = float(self.binarize_threshold)
            if not 0.0 <= t <= 1.0:
                raise ConfigError("binarize_threshold must be in [0, 1] or 'auto'")
        elif self.binarize_threshold != AUTO:
            raise ConfigError("binarize_threshold must be in [0, 1] or 'auto'")

    @property
    def gradient_enabled(self) -> bool:
        return self.alpha is not None or self.beta is not None

    def resolved_weights(self) -> tuple[float, float]:
        return (
            1.0 if self.alpha is None else float(self.alpha),
            1.0 if self.beta is None else float(self.beta),
        )


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Unit-sum 1-D Gaussian, truncated at radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_rows(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = kernel.size // 2
    padded = np.pad(data, ((0, 0), (radius, radius)), mode="reflect")
    out = np.zeros_like(data)
    for i, w in enumerate(kernel):
        out += w * padded[:, i : i + data.shape[1]]
    return out


def gaussian_smooth(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur with mirror padding; sigma=0 is the identity."""
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0:
        return img
    kernel = gaussian_kernel(sigma)
    out = _convolve_rows(img.data, kernel)
    out = _convolve_rows(out.T, kernel).T
    return GrayImage(out)


def directional_gradients(img: GrayImage) -> tuple[GrayImage, GrayImage]:
    """Doubled central differences; unscaled one-sided differences at borders.

    Interior: Gx(x,y) = I(x+1,y) - I(x-1,y) and Gy(x,y) = I(x,y+1) - I(x,y-1).
    """
    if img.width < 3 or img.height < 3:
        raise SizeError("gradients need at least a 3x3 image")
    data = img.data
    gx = np.empty_like(data)
    gx[:, 1:-1] = data[:, 2:] - data[:, :-2]
    gx[:, 0] = data[:, 1] - data[:, 0]
    gx[:, -1] = data[:, -1] - data[:, -2]
    gy = np.empty_like(data)
    gy[1:-1, :] = data[2:, :] - data[:-2, :]
    gy[0, :] = data[1, :] - data[0, :]
    gy[-1, :] = data[-1, :] - data[-2, :]
    return GrayImage(gx), GrayImage(gy)


def bias_combine(gx: GrayImage, gy: GrayImage, alpha: float, beta: float) -> GrayImage:
    """Pointwise alpha * Gy + beta * Gx."""
    if gx.shape != gy.shape:
        raise SizeError(f"gradient shapes differ: {gx.shape} vs {gy.shape}")
    return GrayImage(alpha * gy.data + beta * gx.data)


# Sector -> (dx, dy) comparison offset. Angle is measured from the +x axis
# with y increasing downward; sectors cover 45-degree wedges mod 180.
_SECTOR_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1))


def gradient_sectors(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    return (((angle + 22.5) // 45.0) % 4).astype(np.int8)


def non_max_suppress(bias_field: GrayImage, gx: GrayImage, gy: GrayImage) -> GrayImage:
    """Keep |bias| only where it is >= both neighbors along the gradient sector.

    Off-image neighbors compare as zero, so border pixels auto-pass on the
    outward side. Output is the thinned magnitude map.
    """
    if bias_field.shape != gx.shape or bias_field.shape != gy.shape:
        raise SizeError("bias field and gradient shapes differ")
    mag = np.abs(bias_field.data)
    sectors = gradient_sectors(gx.data, gy.data)
    h, w = mag.shape
    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = mag
    out = np.zeros_like(mag)
    for s, (dx, dy) in enumerate(_SECTOR_OFFSETS):
        sel = sectors == s
        fwd = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        back = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        keep = sel & (mag >= fwd) & (mag >= back)
        out[keep] = mag[keep]
    return GrayImage(out)


def enhance_overlay(edge: GrayImage, n: int) -> GrayImage:
    """Accumulate the edge map n times, saturating at 1.0."""
    if n < 1:
        raise ConfigError("overlay count must be >= 1")
    return GrayImage(np.minimum(n * edge.data, 1.0))


def _shift_max(data: np.ndarray, offsets) -> np.ndarray:
    h, w = data.shape
    padded = np.full((h + 2, w + 2), -np.inf)
    padded[1:-1, 1:-1] = data
    views = [padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dx, dy in offsets]
    return np.maximum.reduce(views)


_SE_OFFSETS = {
    DILATE_NS: ((0, -1), (0, 0), (0, 1)),
    DILATE_EW: ((-1, 0), (0, 0), (1, 0)),
    DILATE_ISO: tuple((dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)),
}


def dilate(edge: GrayImage, iterations: int, direction: str = DILATE_ISO) -> GrayImage:
    """Grayscale dilation with a 3x1 / 1x3 / 3x3 structuring element."""
    if iterations < 0:
        raise ConfigError("iterations must be >= 0")
    if direction not in _SE_OFFSETS:
        raise ConfigError(f"direction must be one of {tuple(_SE_OFFSETS)}")
    data = edge.data
    for _ in range(iterations):
        data = _shift_max(data, _SE_OFFSETS[direction])
    return edge if iterations == 0 else GrayImage(data)


def preprocess(img: GrayImage, config: PreprocConfig) -> GrayImage:
    """Run the configured stage chain; an all-inert config is the identity."""
    out = gaussian_smooth(img, config.gauss_sigma)
    if config.gradient_enabled:
        gx, gy = directional_gradients(out)
        alpha, beta = config.resolved_weights()
        bias = bias_combine(gx, gy, alpha, beta)
        out = non_max_suppress(bias, gx, gy)
    if config.dilation_iterations > 0:
        if config.dilation_direction == DILATE_BOTH:
            ns = dilate(out, config.dilation_iterations, DILATE_NS)
            ew = dilate(out, config.dilation_iterations, DILATE_EW)
            out = GrayImage(np.maximum(ns.data, ew.data))
        else:
            out = dilate(out, config.dilation_iterations, config.dilation_direction)
    if config.overlay_n > 1:
        out = enhance_overlay(out, config.overlay_n)
    return out


def otsu_threshold(data: np.ndarray, bins: int = 256) -> float:
    """Otsu's between-class-variance threshold on [0, 1] data.

    Returns the lowest optimum on ties; a constant image returns its value.
    """
    lo = float(data.min())
    hi = float(data.max())
    if lo == hi:
        return lo
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = counts.sum()
    w0 = np.cumsum(counts)
    w1 = total - w0
    sum0 = np.cumsum(counts * centers)
    mu0 = np.divide(sum0, w0, out=np.zeros_like(sum0), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros_like(sum0), where=w1 > 0)
    variance = w0 * w1 * (mu0 - mu1) ** 2
    return float(centers[int(np.argmax(variance))])


def binarize(img: GrayImage, threshold: float | str = AUTO) -> np.ndarray:
    """Boolean map of pixels at or below the threshold (dark side).

    With ``threshold='auto'`` the cut is picked by :func:`otsu_threshold`.
    """
    t = otsu_threshold(img.data) if threshold == AUTO else float(threshold)
    return img.data <= t
