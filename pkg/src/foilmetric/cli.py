"""Command-line pipeline: generate, preprocess, segment, measure, stats,
overlay, eval, and the all-in-one pipeline subcommand.

Runs are driven by a JSON config (archivable next to the outputs) that any
flag can override. Exit codes: 0 success, 2 validation/input error, 3
segmentation backend error. Batch inputs (globs) are processed concurrently;
``FOILMETRIC_THREADS`` caps the worker count.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, FoilmetricError, SegmentationError
from .features import measure_all, write_csv
from .foilgen import FoilSpec, GroundTruth, generate_foil
from .image import (
    GrayImage,
    MaskMetadata,
    load_gray,
    load_label_mask,
    save_gray,
    save_label_mask,
)
from .preproc import AUTO, PreprocConfig, binarize, preprocess
from .report import extract_outlines, render_overlay, save_rgb, emit_plot
from .segment import (
    ExternalMaskBackend,
    NativeBackend,
    NativeSegConfig,
    segment,
)
from .stats import (
    QUANTITIES,
    evaluate,
    transect_report,
    transect_select,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SEGMENTATION = 3


@dataclass(frozen=True)
class RunConfig:
    """One archivable pipeline run."""

    input: str = ""
    out: str = "run"
    backend: str = "native"
    external_mask: str | None = None
    preproc: PreprocConfig = field(default_factory=PreprocConfig)
    native: NativeSegConfig = field(default_factory=NativeSegConfig)
    px_per_unit: float | None = None
    n_lines: int = 4
    k_sample: int = 10
    seed: int = 0
    threshold: float = 0.10
    transects: str = "vertical"
    truth: str | None = None

    def __post_init__(self):
        if self.backend not in ("native", "external"):
            raise ConfigError("backend must be 'native' or 'external'")
        if self.backend == "external" and not self.external_mask:
            raise ConfigError("external backend requires an external mask path")
        if self.backend == "native" and self.external_mask:
            raise ConfigError("external_mask given but backend is 'native'")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must be in (0, 1)")
        if self.n_lines < 1:
            raise ConfigError("n_lines must be >= 1")
        if self.transects not in ("vertical", "horizontal"):
            raise ConfigError("transects must be 'vertical' or 'horizontal'")


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config {path}: {exc}") from exc
    raw.update({k: v for k, v in overrides.items() if v is not None})
    pre_kwargs = raw.pop("preproc", {})
    native_kwargs = raw.pop("native", {})
    pre = PreprocConfig(**pre_kwargs) if isinstance(pre_kwargs, dict) else pre_kwargs
    if isinstance(native_kwargs, dict):
        if "preproc" in native_kwargs:
            raise ConfigError("preproc is configured at the top level, not under native")
        native = NativeSegConfig(preproc=pre, **native_kwargs)
    else:
        native = native_kwargs
    known = {f for f in RunConfig.__dataclass_fields__ if f not in ("preproc", "native")}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(preproc=pre, native=native, **raw)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _truth_from_files(path: str, true_dx=None, true_dy=None) -> GroundTruth:
    mask, meta = load_label_mask(path)
    dx = true_dx if true_dx is not None else meta.extra.get("true_dx")
    dy = true_dy if true_dy is not None else meta.extra.get("true_dy")
    if dx is None or dy is None:
        raise ConfigError(
            f"truth sidecar for {path} lacks true_dx/true_dy; pass --true-dx/--true-dy"
        )
    return GroundTruth(
        mask=mask,
        true_dx=int(dx),
        true_dy=int(dy),
        n_complete_cells=int(meta.extra.get("n_complete_cells", 0)),
    )


def _write_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_pipeline(config: RunConfig, input_path: str | None = None, prefix: str | None = None):
    """Segment, measure, analyze, and render one image; returns the verdict
    (or None when no truth is configured)."""
    src = input_path or config.input
    if not src:
        raise ConfigError("no input image configured")
    if not Path(src).exists():
        raise ConfigError(f"input image not found: {src}")
    out = Path(prefix if prefix is not None else config.out)

    img = load_gray(src)
    if config.backend == "native":
        backend = NativeBackend(replace(config.native, preproc=config.preproc))
    else:
        if not Path(config.external_mask).exists():
            raise ConfigError(f"external mask not found: {config.external_mask}")
        backend = ExternalMaskBackend(config.external_mask)
    mask, meta = segment(
        img, backend, px_per_unit=config.px_per_unit, source_image=str(src)
    )
    save_label_mask(mask, meta, f"{out}.pred.pgm")

    records = measure_all(mask, meta)
    write_csv(records, f"{out}.cells.csv")

    axis = "x" if config.transects == "vertical" else "y"
    selection = transect_select(mask, records, config.n_lines, axis=axis)
    report = transect_report(selection, records, allow_empty=True)
    _write_json(report.to_json_dict(), Path(f"{out}.stats.json"))
    for i, line in enumerate(report.lines):
        if line.flagged:
            continue
        for qty in QUANTITIES:
            stats = line.quantities.get(qty)
            if stats is None or stats.histogram is None:
                continue
            emit_plot(
                stats.histogram,
                stats.kde,
                f"line {i} at {line.line_pos}: {qty}",
                f"{out}.line{i}.{qty}.svg",
            )

    outlines = extract_outlines(mask)
    markers = [c for per_line in selection.line_centroids for c in per_line]
    overlay = render_overlay(
        img,
        outlines,
        markers=markers,
        lines=selection.line_positions if axis == "x" else None,
        horizontal_lines=selection.line_positions if axis == "y" else None,
    )
    save_rgb(overlay, f"{out}.overlay.png")

    verdict = None
    if config.truth:
        truth = _truth_from_files(config.truth)
        verdict = evaluate(
            records,
            truth,
            threshold=config.threshold,
            k_sample=config.k_sample,
            seed=config.seed,
        )
        _write_json(verdict.to_json_dict(), Path(f"{out}.verdict.json"))
    return verdict


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    spec = FoilSpec(
        dy=args.dy,
        dx=args.dx,
        filter_sigma=args.sigma,
        width=args.width,
        height=args.height,
        line_intensity=args.line_intensity,
        noise_amplitude=args.noise,
        seed=args.seed,
    )
    img, truth = generate_foil(spec)
    prefix = Path(args.out)
    save_gray(img, f"{prefix}.png")
    meta = MaskMetadata(
        width=truth.mask.width,
        height=truth.mask.height,
        backend_name="truth",
        n_cells=truth.mask.n_cells,
        px_per_unit=None,
        source_image=f"{prefix}.png",
        extra={
            "true_dx": truth.true_dx,
            "true_dy": truth.true_dy,
            "n_complete_cells": truth.n_complete_cells,
        },
    )
    save_label_mask(truth.mask, meta, f"{prefix}.truth.pgm")
    print(
        f"generated {prefix}.png ({spec.width}x{spec.height}, "
        f"{truth.mask.n_cells} cells, {truth.n_complete_cells} complete)"
    )
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    img = load_gray(args.infile)
    cfg = PreprocConfig(
        gauss_sigma=args.sigma,
        alpha=args.alpha,
        beta=args.beta,
        overlay_n=args.overlay_n,
        dilation_iterations=args.dilate_iters,
        dilation_direction=args.dilate_dir,
    )
    out = preprocess(img, cfg)
    if args.threshold is not None:
        thr = AUTO if args.threshold == AUTO else float(args.threshold)
        dark = binarize(out, thr)
        out = GrayImage((~dark).astype(float))
    save_gray(out, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _segment_backend(args):
    if args.backend == "external":
        if not args.mask:
            raise ConfigError("external backend requires --mask")
        return ExternalMaskBackend(args.mask)
    native = NativeSegConfig()
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        pre = PreprocConfig(**raw.pop("preproc", {}))
        native = NativeSegConfig(preproc=pre, **raw)
    return NativeBackend(native)


def _cmd_segment(args) -> int:
    img = load_gray(args.infile)
    backend = _segment_backend(args)
    mask, meta = segment(img, backend, px_per_unit=args.px_per_unit, source_image=args.infile)
    save_label_mask(mask, meta, args.out)
    print(f"wrote {args.out} ({mask.n_cells} cells, backend {meta.backend_name})")
    return EXIT_OK


def _cmd_measure(args) -> int:
    mask, meta = load_label_mask(args.mask)
    records = measure_all(mask, meta)
    write_csv(records, args.out)
    print(f"wrote {args.out} ({len(records)} cells)")
    return EXIT_OK


def _cmd_stats(args) -> int:
    mask, meta = load_label_mask(args.mask)
    records = measure_all(mask, meta)
    axis = "x" if args.transects == "vertical" else "y"
    selection = transect_select(mask, records, args.lines, axis=axis)
    report = transect_report(selection, records, allow_empty=True)
    _write_json(report.to_json_dict(), Path(args.out))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_overlay(args) -> int:
    img = load_gray(args.infile)
    mask, _meta = load_label_mask(args.mask)
    outlines = extract_outlines(mask)
    markers = None
    lines = None
    if args.lines:
        records = measure_all(mask)
        selection = transect_select(mask, records, args.lines)
        markers = [c for per_line in selection.line_centroids for c in per_line]
        lines = selection.line_positions
    overlay = render_overlay(img, outlines, markers=markers, lines=lines)
    save_rgb(overlay, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    pred_mask, pred_meta = load_label_mask(args.pred)
    truth = _truth_from_files(args.truth, args.true_dx, args.true_dy)
    records = measure_all(pred_mask, pred_meta)
    verdict = evaluate(
        records, truth, threshold=args.threshold, k_sample=args.k_sample, seed=args.seed
    )
    _write_json(verdict.to_json_dict(), Path(args.out))
    status = "success" if verdict.success else f"failure ({verdict.reason})"
    print(f"wrote {args.out}: {status}")
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    overrides = {
        "input": args.infile,
        "out": args.out,
        "backend": args.backend,
        "external_mask": args.mask,
        "px_per_unit": args.px_per_unit,
        "n_lines": args.lines,
        "k_sample": args.k_sample,
        "seed": args.seed,
        "threshold": args.threshold,
        "truth": args.truth,
    }
    config = load_run_config(args.config, overrides)
    inputs = sorted(glob.glob(config.input)) or ([config.input] if config.input else [])
    if not inputs:
        raise ConfigError(f"no input matches {config.input!r}")
    if len(inputs) == 1:
        verdict = run_pipeline(config, inputs[0])
    else:
        try:
            workers = int(os.environ.get("FOILMETRIC_THREADS", "0"))
        except ValueError as exc:
            raise ConfigError(f"FOILMETRIC_THREADS must be an integer: {exc}") from exc
        workers = workers or min(8, len(inputs))
        workers = max(1, min(workers, len(inputs)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_pipeline, config, src, f"{config.out}.{Path(src).stem}")
                for src in inputs
            ]
            verdict = None
            for fut in futures:
                verdict = fut.result()
    if verdict is not None:
        status = "success" if verdict.success else f"failure ({verdict.reason})"
        print(f"verdict: {status}")
    print(f"pipeline done: {len(inputs)} image(s) -> {config.out}*")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foilmetric",
        description="Measure detonation cells on soot foil images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a rhombus-lattice test foil")
    g.add_argument("--dy", type=int, required=True, help="vertical cell span (px)")
    g.add_argument("--dx", type=int, required=True, help="horizontal cell span (px)")
    g.add_argument("--sigma", type=float, default=0.0, help="diffusion filter sigma")
    g.add_argument("--width", type=int, default=500)
    g.add_argument("--height", type=int, default=500)
    g.add_argument("--noise", type=float, default=0.0, help="additive Gaussian noise std")
    g.add_argument("--line-intensity", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output prefix")
    g.set_defaults(func=_cmd_generate)

    p = sub.add_parser("preprocess", help="run the preprocessing chain on an image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--overlay-n", type=int, default=1)
    p.add_argument("--dilate-iters", type=int, default=0)
    p.add_argument(
        "--dilate-dir",
        default="isotropic",
        choices=("north-south", "east-west", "isotropic", "both"),
    )
    p.add_argument("--threshold", default=None, help="binarize output: number or 'auto'")
    p.set_defaults(func=_cmd_preprocess)

    s = sub.add_parser("segment", help="produce a label mask from an image")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--backend", choices=("native", "external"), default="native")
    s.add_argument("--config", help="JSON file with native backend settings")
    s.add_argument("--mask", help="external exchange mask (external backend)")
    s.add_argument("--px-per-unit", type=float, default=None)
    s.add_argument("--out", required=True, help="output mask path (.pgm)")
    s.set_defaults(func=_cmd_segment)

    m = sub.add_parser("measure", help="per-cell geometry CSV from a mask")
    m.add_argument("--mask", required=True)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_measure)

    st = sub.add_parser("stats", help="transect histograms/KDE report from a mask")
    st.add_argument("--mask", required=True)
    st.add_argument("--lines", type=int, default=4)
    st.add_argument("--transects", choices=("vertical", "horizontal"), default="vertical")
    st.add_argument("--out", required=True)
    st.set_defaults(func=_cmd_stats)

    o = sub.add_parser("overlay", help="render red outlines over the image")
    o.add_argument("--in", dest="infile", required=True)
    o.add_argument("--mask", required=True)
    o.add_argument("--lines", type=int, default=0, help="also draw n transect lines")
    o.add_argument("--out", required=True)
    o.set_defaults(func=_cmd_overlay)

    e = sub.add_parser("eval", help="success verdict of a prediction vs ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--true-dx", type=int, default=None)
    e.add_argument("--true-dy", type=int, default=None)
    e.add_argument("--threshold", type=float, default=0.10)
    e.add_argument("--k-sample", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_eval)

    pl = sub.add_parser("pipeline", help="full run: segment, measure, stats, render, eval")
    pl.add_argument("--config", help="JSON run config; flags override")
    pl.add_argument("--in", dest="infile", default=None)
    pl.add_argument("--out", default=None)
    pl.add_argument("--backend", choices=("native", "external"), default=None)
    pl.add_argument("--mask", default=None, help="external exchange mask")
    pl.add_argument("--px-per-unit", type=float, default=None)
    pl.add_argument("--lines", type=int, default=None)
    pl.add_argument("--k-sample", type=int, default=None)
    pl.add_argument("--seed", type=int, default=None)
    pl.add_argument("--threshold", type=float, default=None)
    pl.add_argument("--truth", default=None)
    pl.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except SegmentationError as exc:
        print(f"segmentation error: {exc}", file=sys.stderr)
        return EXIT_SEGMENTATION
    except (FoilmetricError, FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
