#!/usr/bin/env python3
"""Sweep link faults against the construction-site scenario.

Runs the scripted session over a grid of loss probabilities and blackout
lengths, reporting completion, emergency-stop counts, and timing. Shows
how the safety net behaves as the link degrades.

Usage: python scripts/fault_sweep.py [out.csv]
"""

import dataclasses
import sys

from tgsim.scenario import bundled_scenario
from tgsim.session import METRICS_CSV_HEADER, run_session


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else "out/fault_sweep.csv"
    scenario = bundled_scenario("construction_site")
    rows = []
    print(f"{'loss':>5} {'blackout':>9} {'seed':>4} {'exit':>10} "
          f"{'t_total':>8} {'n_mrm':>5}")
    for loss in (0.0, 0.02, 0.05, 0.10):
        for blackout_ms in (0, 100, 300):
            for seed in (1, 2, 3):
                windows = ((34_000.0, 34_000.0 + blackout_ms),) if blackout_ms else ()
                ch = dataclasses.replace(scenario.channel, loss_prob=loss,
                                         blackout_windows=windows)
                scn = dataclasses.replace(scenario, channel=ch)
                res = run_session(scn, seed=seed, sim_timeout_s=400.0)
                m = res.metrics
                print(f"{loss:>5.2f} {blackout_ms:>7}ms {seed:>4} "
                      f"{res.exit_reason:>10} {m.t_total_s:>8.1f} {m.n_mrm:>5}")
                rows.append(f"{m.csv_row()},{loss},{blackout_ms},{res.exit_reason}")

    from pathlib import Path
    p = Path(out)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(METRICS_CSV_HEADER + ",loss_prob,blackout_ms,exit_reason\n"
                 + "\n".join(rows) + "\n")
    print(f"\nwrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
