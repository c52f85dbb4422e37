"""Perturbation margin table for the Izhikevich neuron, d2 = (rho sin t, 0) on jumps.

Prints the table for the documented set metric and, with --nominal, for the
distance to the unperturbed solution at equal time as a diagnostic.

Usage: python3 scripts/izhikevich_margin_table.py [--trials 4] [--nominal]
"""

import argparse
import time

from hylc import catalog
from hylc.cycles import extract_limit_cycle, find_fixed_point
from hylc.flow import IntegratorConfig
from hylc.robust import SweepProtocol, sweep_margin

EPS = [0.3, 0.9, 1.5]
GRID = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--nominal", action="store_true")
    args = ap.parse_args()

    entry = catalog.get_entry("izhikevich")
    sys = entry.build()
    cfg = IntegratorConfig(step=entry.step)
    x = find_fixed_point(sys, entry.fixed_point_guess, cfg)
    cyc = extract_limit_cycle(sys, x, cfg)
    metrics = ["set", "nominal"] if args.nominal else ["set"]
    for metric in metrics:
        t0 = time.perf_counter()
        table = sweep_margin(sys, cyc, "perturbation_rho", entry.K_box, EPS, GRID, trials=args.trials,
                             seed=args.seed, cfg=cfg, jobs=args.jobs, protocol=SweepProtocol(metric=metric))
        print(f"# metric = {metric}")
        print(table.to_csv(), end="")
        print("ratios", [round(r, 4) for r in table.ratios()], f"({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
