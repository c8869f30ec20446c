"""Population statistics over measured cells.

Covers seeded cell sampling, vertical/horizontal transect selection,
Bayesian-optimal equal-width histogram binning, Gaussian kernel density
estimates with Silverman bandwidth, and the 10%-error success verdict used
to judge a segmentation against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DegenerateDataError, InsufficientCellsError
from .features import CellRecord
from .foilgen import GroundTruth
from .image import LabelMask

DEFAULT_MIN_CELLS = 4
KNUTH_MAX_BINS = 200
KDE_GRID_POINTS = 241


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleResult:
    labels: tuple[int, ...]
    mean_dx: float
    mean_dy: float
    requested_k: int
    used_all: bool


def sample_cells(records: list[CellRecord], k: int, seed: int) -> SampleResult:
    """Uniform sample of k cells without replacement, deterministic in seed.

    Sampling is keyed by the label set, not list order, so permuting the
    records cannot change the outcome. When fewer than k records exist the
    whole population is used and the result is flagged.
    """
    if not records:
        raise InsufficientCellsError("no cells to sample")
    if k < 1:
        raise ConfigError("sample size must be >= 1")
    pool = sorted(records, key=lambda r: r.label)
    used_all = k >= len(pool)
    if used_all:
        chosen = pool
    else:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(pool), size=k, replace=False)
        chosen = [pool[i] for i in sorted(idx)]
    return SampleResult(
        labels=tuple(r.label for r in chosen),
        mean_dx=float(np.mean([r.dx for r in chosen])),
        mean_dy=float(np.mean([r.dy for r in chosen])),
        requested_k=k,
        used_all=used_all,
    )


# ---------------------------------------------------------------------------
# Transects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransectSelection:
    """Cells crossed by equidistant sampling lines.

    ``axis`` is "x" for vertical lines at constant x (the default) or "y" for
    horizontal lines. ``line_positions[i]`` is the pixel column (or row), and
    ``line_labels[i]`` / ``line_centroids[i]`` the cells it crosses.
    """

    axis: str
    line_positions: tuple[int, ...]
    line_labels: tuple[tuple[int, ...], ...]
    line_centroids: tuple[tuple[tuple[float, float], ...], ...]


def transect_select(
    mask: LabelMask,
    records: list[CellRecord],
    n_lines: int,
    axis: str = "x",
) -> TransectSelection:
    """Select cells crossed by n_lines equidistant transects.

    Line i sits at extent * (i + 1) / (n_lines + 1), rounded to the nearest
    pixel. A cell is selected for a line when any of its pixels lies in that
    column (row); a cell may appear on several lines.
    """
    if n_lines < 1:
        raise ConfigError("n_lines must be >= 1")
    if axis not in ("x", "y"):
        raise ConfigError("axis must be 'x' or 'y'")
    extent = mask.width if axis == "x" else mask.height
    by_label = {r.label: r for r in records}
    positions = []
    labels_per_line = []
    centroids_per_line = []
    for i in range(n_lines):
        pos = int(math.floor(extent * (i + 1) / (n_lines + 1) + 0.5))
        pos = min(pos, extent - 1)
        line = mask.labels[:, pos] if axis == "x" else mask.labels[pos, :]
        hit = np.unique(line)
        hit = [int(k) for k in hit if k > 0]
        positions.append(pos)
        labels_per_line.append(tuple(hit))
        centroids_per_line.append(
            tuple(by_label[k].centroid for k in hit if k in by_label)
        )
    return TransectSelection(
        axis=axis,
        line_positions=tuple(positions),
        line_labels=tuple(labels_per_line),
        line_centroids=tuple(centroids_per_line),
    )


# ---------------------------------------------------------------------------
# Histograms (Bayesian-optimal bin count)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    n: int

    @property
    def m(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class KnuthResult:
    m: int
    bin_edges: np.ndarray
    log_posterior: np.ndarray  # certificate: F(m) for m = 1..m_max, in order


def knuth_log_posterior(data: np.ndarray, m: int) -> float:
    """Marginal log-posterior of an m-bin equal-width histogram model."""
    n = data.size
    counts, _ = np.histogram(data, bins=m, range=(float(data.min()), float(data.max())))
    return float(
        n * math.log(m)
        + gammaln(m / 2.0)
        - m * gammaln(0.5)
        - gammaln(n + m / 2.0)
        + np.sum(gammaln(counts + 0.5))
    )


def knuth_bin_count(data) -> KnuthResult:
    """Pick the bin count maximizing the Bayesian histogram posterior.

    Equal-width bins over [min, max]; the search runs m = 1..m_max with
    m_max = min(ceil(4 * sqrt(n)), 200). The full F(m) curve is returned so
    callers can re-verify the argmax.
    """
    arr = np.asarray(data, dtype=np.float64).ravel()
    if arr.size < 2 or np.unique(arr).size < 2:
        raise DegenerateDataError("need at least 2 distinct values to bin")
    m_max = min(math.ceil(4.0 * math.sqrt(arr.size)), KNUTH_MAX_BINS)
    scores = np.array([knuth_log_posterior(arr, m) for m in range(1, m_max + 1)])
    m_star = int(np.argmax(scores)) + 1
    edges = np.linspace(float(arr.min()), float(arr.max()), m_star + 1)
    return KnuthResult(m=m_star, bin_edges=edges, log_posterior=scores)


def knuth_histogram(data) -> Histogram:
    arr = np.asarray(data, dtype=np.float64).ravel()
    result = knuth_bin_count(arr)
    counts, edges = np.histogram(arr, bins=result.bin_edges)
    return Histogram(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        n=int(arr.size),
    )


# ---------------------------------------------------------------------------
# Kernel density estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KdeCurve:
    grid: tuple[float, ...]
    density: tuple[float, ...]
    bandwidth: float


def silverman_bandwidth(data: np.ndarray) -> float:
    """0.9 * min(std, IQR/1.34) * n^(-1/5); falls back to whichever is positive."""
    n = data.size
    std = float(np.std(data, ddof=1))
    q25, q75 = np.percentile(data, [25.0, 75.0])
    iqr_term = float(q75 - q25) / 1.34
    candidates = [c for c in (std, iqr_term) if c > 0]
    if not candidates:
        raise DegenerateDataError("data has no spread; KDE bandwidth is zero")
    return 0.9 * min(candidates) * n ** (-0.2)


def gaussian_kde(data, grid=None) -> KdeCurve:
    """Gaussian-kernel density estimate on the given (or an automatic) grid.

    The automatic grid spans [min - 3h, max + 3h], which keeps the trapezoid
    integral of the curve within 2% of one.
    """
    arr = np.asarray(data, dtype=np.float64).ravel()
    if arr.size < 2:
        raise DegenerateDataError("need at least 2 samples for a KDE")
    h = silverman_bandwidth(arr)
    if grid is None:
        grid = np.linspace(arr.min() - 3 * h, arr.max() + 3 * h, KDE_GRID_POINTS)
    else:
        grid = np.asarray(grid, dtype=np.float64).ravel()
    z = (grid[:, None] - arr[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (arr.size * h * math.sqrt(2.0 * math.pi))
    return KdeCurve(
        grid=tuple(float(g) for g in grid),
        density=tuple(float(d) for d in dens),
        bandwidth=h,
    )


# ---------------------------------------------------------------------------
# Evaluation verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationVerdict:
    mean_dx: float
    mean_dy: float
    true_dx: float
    true_dy: float
    rel_err_dx: float
    rel_err_dy: float
    n_matched: int
    success: bool
    reason: str = ""

    def to_json_dict(self) -> dict:
        def clean(v):
            return v if math.isfinite(v) else None

        return {
            "mean_dx": clean(self.mean_dx),
            "mean_dy": clean(self.mean_dy),
            "true_dx": self.true_dx,
            "true_dy": self.true_dy,
            "rel_err_dx": clean(self.rel_err_dx),
            "rel_err_dy": clean(self.rel_err_dy),
            "n_matched": self.n_matched,
            "success": self.success,
            "reason": self.reason,
        }


def evaluate(
    pred_records: list[CellRecord],
    truth: GroundTruth,
    threshold: float = 0.10,
    k_sample: int = 10,
    seed: int = 0,
    min_cells: int = DEFAULT_MIN_CELLS,
) -> EvaluationVerdict:
    """Judge predicted cell spans against ground truth.

    Border-touching cells are excluded, k_sample cells are sampled (seeded),
    and the sample means of dx/dy are compared to the true spans. Success
    requires both relative errors at or below ``threshold`` and at least
    ``min_cells`` usable cells; otherwise the verdict carries a reason.
    """
    if not 0 < threshold < 1:
        raise ConfigError("threshold must be in (0, 1)")
    pool = [r for r in pred_records if not r.touches_border]
    if len(pool) < min_cells:
        return EvaluationVerdict(
            mean_dx=float("nan"),
            mean_dy=float("nan"),
            true_dx=float(truth.true_dx),
            true_dy=float(truth.true_dy),
            rel_err_dx=float("nan"),
            rel_err_dy=float("nan"),
            n_matched=len(pool),
            success=False,
            reason=f"insufficient cells: {len(pool)} interior cells, need {min_cells}",
        )
    sample = sample_cells(pool, k_sample, seed)
    rel_dx = abs(sample.mean_dx - truth.true_dx) / truth.true_dx
    rel_dy = abs(sample.mean_dy - truth.true_dy) / truth.true_dy
    ok = rel_dx <= threshold and rel_dy <= threshold
    reason = "" if ok else f"relative error above {threshold:.0%}"
    return EvaluationVerdict(
        mean_dx=sample.mean_dx,
        mean_dy=sample.mean_dy,
        true_dx=float(truth.true_dx),
        true_dy=float(truth.true_dy),
        rel_err_dx=rel_dx,
        rel_err_dy=rel_dy,
        n_matched=len(pool),
        success=ok,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# Per-transect statistics report
# ---------------------------------------------------------------------------

QUANTITIES = ("area", "dx", "dy")


@dataclass(frozen=True)
class QuantityStats:
    name: str
    n: int
    mean: float
    stddev: float
    histogram: Histogram | None
    kde: KdeCurve | None
    degenerate: bool = False


@dataclass(frozen=True)
class LineReport:
    line_pos: int
    n_cells: int
    flagged: bool
    quantities: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StatsReport:
    axis: str
    lines: tuple[LineReport, ...]

    def to_json_dict(self) -> dict:
        out = {"axis": self.axis, "lines": []}
        for line in self.lines:
            entry: dict = {
                "line_x": line.line_pos,
                "n_cells": line.n_cells,
                "flagged": line.flagged,
            }
            for qty in QUANTITIES:
                stats = line.quantities.get(qty)
                if stats is None:
                    entry[qty] = None
                    continue
                q: dict = {
                    "n": stats.n,
                    "mean": stats.mean,
                    "stddev": stats.stddev,
                    "degenerate": stats.degenerate,
                }
                if stats.histogram is not None:
                    q["edges"] = list(stats.histogram.bin_edges)
                    q["counts"] = list(stats.histogram.counts)
                if stats.kde is not None:
                    q["kde"] = {
                        "grid": list(stats.kde.grid),
                        "density": list(stats.kde.density),
                        "bandwidth": stats.kde.bandwidth,
                    }
                entry[qty] = q
            out["lines"].append(entry)
        return out


def _quantity_stats(name: str, values: np.ndarray) -> QuantityStats:
    mean = float(np.mean(values))
    stddev = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    try:
        hist = knuth_histogram(values)
        kde = gaussian_kde(values)
        return QuantityStats(name, int(values.size), mean, stddev, hist, kde)
    except DegenerateDataError:
        return QuantityStats(name, int(values.size), mean, stddev, None, None, True)


def transect_report(
    selection: TransectSelection,
    records: list[CellRecord],
    allow_empty: bool = False,
) -> StatsReport:
    """Histogram + KDE summary of area/dx/dy for each transect line.

    Lines crossing fewer than two cells yield a flagged entry instead of
    failing; all-equal values yield degenerate quantity entries (mean only).
    With every line flagged the report is an error unless ``allow_empty``.
    """
    by_label = {r.label: r for r in records}
    lines = []
    for pos, labels in zip(selection.line_positions, selection.line_labels):
        cells = [by_label[k] for k in labels if k in by_label]
        if len(cells) < 2:
            lines.append(LineReport(line_pos=pos, n_cells=len(cells), flagged=True))
            continue
        values = {
            "area": np.array([float(c.area_px) for c in cells]),
            "dx": np.array([c.dx for c in cells]),
            "dy": np.array([c.dy for c in cells]),
        }
        quantities = {name: _quantity_stats(name, vals) for name, vals in values.items()}
        lines.append(
            LineReport(line_pos=pos, n_cells=len(cells), flagged=False, quantities=quantities)
        )
    if not allow_empty and all(line.flagged for line in lines):
        raise InsufficientCellsError("no transect line crosses at least 2 cells")
    return StatsReport(axis=selection.axis, lines=tuple(lines))
