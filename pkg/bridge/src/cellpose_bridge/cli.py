"""Command-line entry point.

Exit codes follow the consumer's convention: 0 success, 2 validation or
setup error (bad arguments, unreadable input, missing model/weights),
3 inference failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bridge import AUTO, MODEL_VARIANTS, BridgeConfig, InferenceError, SetupError, bridge_segment
from .maskio import ExchangeError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFERENCE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Segment a soot foil image with a pretrained cyto-family "
        "model and write a foilmetric exchange mask.",
    )
    parser.add_argument("--model", choices=MODEL_VARIANTS, default="cyto2")
    parser.add_argument("--in", dest="infile", required=True, help="PNG or PGM image")
    parser.add_argument("--out", required=True, help="output prefix (.pgm/.mask.json)")
    parser.add_argument(
        "--diameter",
        default=AUTO,
        help="expected cell diameter in pixels, or 'auto' (default)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    if not Path(args.infile).exists():
        print(f"error: input image not found: {args.infile}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        config = BridgeConfig(
            model_variant=args.model,
            input_path=args.infile,
            output_prefix=args.out,
            expected_cell_diameter=args.diameter,
        )
        mask_path, sidecar = bridge_segment(config)
    except (ValueError, ExchangeError, SetupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InferenceError as exc:
        print(f"inference error: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    print(f"wrote {mask_path} and {sidecar}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
