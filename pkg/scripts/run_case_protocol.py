#!/usr/bin/env python3
"""Desk-scale verification protocol: five lattice geometries of increasing
directional skew, segmented with the native backend and judged at the 10%
error bar (10 sampled cells, seed 0).

Prints one verdict row per case; exits non-zero if the expected
success/failure pattern (cases 1, 2, 3, 5 pass; case 4 fails) is not met.
"""

import sys
import time

from foilmetric.features import measure_all
from foilmetric.foilgen import FoilSpec, generate_foil
from foilmetric.segment import NativeBackend, segment
from foilmetric.stats import evaluate

CASES = {
    1: dict(dy=50, dx=50, filter_sigma=1.5),
    2: dict(dy=50, dx=120, filter_sigma=2.0),
    3: dict(dy=120, dx=50, filter_sigma=1.5),
    4: dict(dy=120, dx=10, filter_sigma=2.0),
    5: dict(dy=120, dx=50, filter_sigma=2.0),
}
EXPECTED = {1: True, 2: True, 3: True, 4: False, 5: True}


def main() -> int:
    print(f"{'case':>4} {'Dy':>4} {'Dx':>4} {'sigma':>5} {'cells':>6} "
          f"{'mean Dy':>8} {'mean Dx':>8} {'err Dy':>7} {'err Dx':>7} "
          f"{'time':>6}  verdict")
    all_ok = True
    for case, kwargs in CASES.items():
        start = time.perf_counter()
        img, truth = generate_foil(FoilSpec(**kwargs))
        mask, meta = segment(img, NativeBackend())
        records = measure_all(mask, meta)
        v = evaluate(records, truth, threshold=0.10, k_sample=10, seed=0)
        elapsed = time.perf_counter() - start
        ok = v.success == EXPECTED[case]
        all_ok &= ok
        mark = "ok" if v.success else "x"
        expect = "" if ok else "  <-- UNEXPECTED"
        print(f"{case:>4} {kwargs['dy']:>4} {kwargs['dx']:>4} "
              f"{kwargs['filter_sigma']:>5.1f} {v.n_matched:>6} "
              f"{v.mean_dy:>8.1f} {v.mean_dx:>8.1f} "
              f"{v.rel_err_dy:>6.1%} {v.rel_err_dx:>6.1%} "
              f"{elapsed:>5.2f}s  {mark}{expect}")
    print("pattern:", "as expected" if all_ok else "MISMATCH")
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
