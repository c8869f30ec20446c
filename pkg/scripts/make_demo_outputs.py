#!/usr/bin/env python3
"""Produce a browsable demo set under out/: a noisy synthetic foil, its
segmentation overlay with transect lines and centroid markers, the per-cell
CSV, the stats JSON, and the per-line histogram/KDE plots.

Usage: python scripts/make_demo_outputs.py [outdir]
"""

import sys
from pathlib import Path

from foilmetric.cli import main as cli_main
from foilmetric.foilgen import FoilSpec, generate_foil
from foilmetric.image import save_gray


def main() -> int:
    outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    outdir.mkdir(parents=True, exist_ok=True)

    spec = FoilSpec(dy=60, dx=44, filter_sigma=1.5, width=600, height=420,
                    noise_amplitude=0.03, seed=5)
    img, truth = generate_foil(spec)
    foil_png = outdir / "demo.png"
    save_gray(img, foil_png)
    print(f"wrote {foil_png} ({truth.mask.n_cells} cells, "
          f"{truth.n_complete_cells} complete, spans {truth.true_dx}x{truth.true_dy})")

    code = cli_main([
        "pipeline",
        "--in", str(foil_png),
        "--out", str(outdir / "demo"),
        "--lines", "4",
    ])
    if code != 0:
        return code
    for p in sorted(outdir.glob("demo.*")):
        print(f"  {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
