#!/usr/bin/env python3
"""Regenerate every convergence and contraction table into an output directory.

    python scripts/reproduce_tables.py --out results/ [--deep] [--quick]

Each table goes to ``<name>.md`` and ``<name>.csv``; contraction tables also
get ``<name>.plot`` with (m, contraction) columns per level.
"""
import argparse
import os
import sys
import time

from rtmg import harness
from rtmg import multigrid as mg

CONVERGENCE_RUNS = [
    ("conv_darcy_square", "square", "darcy"),
    ("conv_cd_square", "square", "cd"),
    ("conv_darcy_lshape", "lshape", "darcy"),
    ("conv_cd_lshape", "lshape", "cd"),
]

CONTRACTION_RUNS = [
    ("wcycle_darcy_square", "square", "darcy", "W"),
    ("wcycle_cd_square", "square", "cd", "W"),
    ("vcycle_darcy_square", "square", "darcy", "V"),
    ("vcycle_cd_square", "square", "cd", "V"),
    ("wcycle_darcy_lshape", "lshape", "darcy", "W"),
    ("wcycle_cd_lshape", "lshape", "cd", "W"),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--deep", action="store_true", help="level 7 convergence rows, level 6 contractions")
    ap.add_argument("--quick", action="store_true", help="small levels only, for smoke testing")
    ap.add_argument("--velocity-weight", type=float, default=1.0)
    ap.add_argument("--only", choices=["convergence", "contraction"], default=None)
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    cfg = mg.MGConfig(velocity_weight=args.velocity_weight)

    def log(msg):
        print(msg, file=sys.stderr, flush=True)

    if args.only != "contraction":
        top = 4 if args.quick else (7 if args.deep else 6)
        for name, domain, problem in CONVERGENCE_RUNS:
            t0 = time.perf_counter()
            spec = harness.ExperimentSpec(kind="convergence", domain_tag=domain, problem=problem,
                                          levels=range(2, top + 1))
            rows = harness.run_convergence(spec)
            harness.emit(rows, "md", os.path.join(args.out, name + ".md"))
            harness.emit(rows, "csv", os.path.join(args.out, name + ".csv"))
            log(f"{name}: {time.perf_counter() - t0:.1f}s")

    if args.only != "convergence":
        top = 3 if args.quick else (6 if args.deep else 5)
        for name, domain, problem, cycle in CONTRACTION_RUNS:
            t0 = time.perf_counter()
            spec = harness.ExperimentSpec(kind="contraction", domain_tag=domain, problem=problem,
                                          cycle=cycle, levels=range(1, top + 1), mg_config=cfg)
            rows = harness.run_contraction(spec)
            harness.emit(rows, "md", os.path.join(args.out, name + ".md"))
            harness.emit(rows, "csv", os.path.join(args.out, name + ".csv"))
            harness.emit(rows, "plot", os.path.join(args.out, name + ".plot"))
            log(f"{name}: {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
