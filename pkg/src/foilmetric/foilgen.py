"""Synthetic rhombus-patterned soot foils with exact ground truth.

The pattern is a staggered lattice of diamond-shaped cells separated by dark
one-pixel boundary lines, mimicking the fish-scale record a detonation leaves
on a sooted wall. Every interior cell is the same pixel stencil, so its
horizontal and vertical extreme-point spans are exact by construction; the
ground-truth mask therefore measures to ``true_dx``/``true_dy`` with zero
error before any diffusion is applied.

Geometry: a cell with nominal spans (dx, dy) is the closed diamond
``|px - cx| / (dx/2) + |py - cy| / (dy/2) <= 1``. Stamping it on a lattice of
pitch exactly (dx, dy) would force neighboring cells to share their vertex
pixels, so the pitch is padded to (dx + 2, dy + 2) (rounded up to even): the
smallest centered lattice in which distinct cells never touch 4-adjacently
and a dark 8-connected line survives between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GenerationError
from .image import GrayImage, LabelMask
from .preproc import gaussian_smooth

MIN_COMPLETE_CELLS = 4


@dataclass(frozen=True)
class FoilSpec:
    """Generator parameters; ``dy`` is the vertical span, ``dx`` horizontal."""

    dy: int
    dx: int
    filter_sigma: float
    width: int = 500
    height: int = 500
    line_intensity: float = 0.1
    noise_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dy < 2 or self.dx < 2:
            raise ConfigError("dy and dx must be >= 2")
        if self.width < self.dx or self.height < self.dy:
            raise ConfigError("image must be at least one cell span in each direction")
        if self.filter_sigma < 0:
            raise ConfigError("filter_sigma must be >= 0")
        if self.noise_amplitude < 0:
            raise ConfigError("noise_amplitude must be >= 0")
        if not 0.0 <= self.line_intensity <= 1.0:
            raise ConfigError("line_intensity must be in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """Exact per-pixel cell identity plus the spans the lattice realizes."""

    mask: LabelMask
    true_dx: int
    true_dy: int
    n_complete_cells: int
    complete_labels: tuple[int, ...] = ()


def _even_pitch(span: int) -> int:
    pitch = span + 2
    return pitch if pitch % 2 == 0 else pitch + 1


def generate_foil(spec: FoilSpec) -> tuple[GrayImage, GroundTruth]:
    """Render the lattice image and its ground-truth mask.

    The returned image is the crisp lattice blurred by ``filter_sigma`` with
    seeded additive Gaussian noise of ``noise_amplitude``, clamped to [0, 1].
    The mask is taken before diffusion. Deterministic in ``spec``.
    """
    w, h = spec.width, spec.height
    pitch_x = _even_pitch(spec.dx)
    pitch_y = _even_pitch(spec.dy)
    half_x = spec.dx // 2
    half_y = spec.dy // 2

    xs = np.arange(w, dtype=np.int64)
    ys = np.arange(h, dtype=np.int64)
    gx, gy = np.meshgrid(xs, ys)

    # Nearest lattice slot in the sheared (u, v) frame; slot (n, m) has its
    # center at ((n + m) * pitch_x / 2, (n - m) * pitch_y / 2).
    u = gx / pitch_x + gy / pitch_y
    v = gx / pitch_x - gy / pitch_y
    n = np.rint(u).astype(np.int64)
    m = np.rint(v).astype(np.int64)
    cx = (pitch_x // 2) * (n + m)
    cy = (pitch_y // 2) * (n - m)

    # Closed-diamond membership in exact integer arithmetic.
    inside = (
        2 * np.abs(gx - cx) * spec.dy + 2 * np.abs(gy - cy) * spec.dx
        <= spec.dx * spec.dy
    )

    n_rel = n - n.min()
    m_rel = m - m.min()
    slot_key = n_rel * (int(m_rel.max()) + 1) + m_rel + 1
    slot_key[~inside] = 0
    mask = LabelMask.canonical(slot_key)

    stencil_area = _stencil_area(spec.dx, spec.dy)
    areas = np.bincount(mask.labels.ravel(), minlength=mask.n_cells + 1)
    complete = tuple(int(k) for k in range(1, mask.n_cells + 1) if areas[k] == stencil_area)
    if len(complete) < MIN_COMPLETE_CELLS:
        raise GenerationError(
            f"lattice (dy={spec.dy}, dx={spec.dx}) yields only {len(complete)} complete "
            f"cells in a {w}x{h} image; need at least {MIN_COMPLETE_CELLS}"
        )
    truth = GroundTruth(
        mask=mask,
        true_dx=2 * half_x,
        true_dy=2 * half_y,
        n_complete_cells=len(complete),
        complete_labels=complete,
    )

    img = np.where(mask.labels > 0, 1.0, spec.line_intensity)
    out = gaussian_smooth(GrayImage(img), spec.filter_sigma)
    if spec.noise_amplitude > 0:
        rng = np.random.default_rng(spec.seed)
        noisy = out.data + rng.normal(0.0, spec.noise_amplitude, size=out.data.shape)
        out = GrayImage(np.clip(noisy, 0.0, 1.0))
    return out, truth


def _stencil_area(dx: int, dy: int) -> int:
    half_y = dy // 2
    total = 0
    for offset in range(-half_y, half_y + 1):
        # widest |px| with 2|px|dy + 2|offset|dx <= dx*dy
        reach = (dx * dy - 2 * abs(offset) * dx) // (2 * dy)
        total += 2 * reach + 1
    return total
