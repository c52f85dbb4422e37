"""Inflation margin table for the TCP model.

Usage: python3 scripts/tcp_inflation_table.py [--trials 8] [--policy earliest] [--jobs 1]
"""

import argparse
import time

from hylc import catalog
from hylc.cycles import extract_limit_cycle
from hylc.flow import IntegratorConfig
from hylc.robust import SweepProtocol, sweep_margin


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--policy", choices=["earliest", "latest"], default="earliest")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    entry = catalog.get_entry("tcp")
    sys = entry.build()
    cfg = IntegratorConfig(step=entry.step)
    cyc = extract_limit_cycle(sys, (1.0, 1.6), cfg)
    t0 = time.perf_counter()
    table = sweep_margin(sys, cyc, "inflation_eps", entry.K_box, [0.01, 0.02, 0.04],
                         [0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32], trials=args.trials, seed=args.seed,
                         cfg=cfg, jobs=args.jobs, protocol=SweepProtocol(policy=args.policy))
    print(table.to_csv(), end="")
    print("ratios", [round(r, 3) for r in table.ratios()], f"({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
