#!/usr/bin/env python3
"""Nominal construction-site run: metrics table plus plot CSVs.

Usage: python scripts/run_nominal.py [seed] [outdir]
"""

import sys
from pathlib import Path

from tgsim.cli import main as cli_main
from tgsim.session import DC_BASELINE_SPEED_KMH, DC_BASELINE_TOTAL_S


def main() -> int:
    seed = sys.argv[1] if len(sys.argv) > 1 else "7"
    outdir = Path(sys.argv[2] if len(sys.argv) > 2 else "out/nominal")
    outdir.mkdir(parents=True, exist_ok=True)
    rc = cli_main(["run", "--seed", seed,
                   "--out", str(outdir / "metrics.csv"),
                   "--record", str(outdir / "record.csv")])
    if rc != 0:
        return rc
    rc = cli_main(["plot-data", "--seed", seed, "--outdir", str(outdir)])
    print(f"\nbaselines for comparison: direct control "
          f"{DC_BASELINE_TOTAL_S} s total, {DC_BASELINE_SPEED_KMH} km/h mean")
    print(f"artifacts in {outdir}/")
    return rc


if __name__ == "__main__":
    sys.exit(main())
