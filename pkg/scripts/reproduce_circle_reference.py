"""Circular-interface benchmark for both coefficient orderings.

Runs levels N = 16..128 plus the N = 256 reference and writes
eigenvalues.csv / convergence.csv per case under --out.
"""

import argparse
import time
from pathlib import Path

from crifem.driver import convergence_study, example_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/circle_reference")
    ap.add_argument("--tau0", type=float, default=1.0)
    args = ap.parse_args()
    for swapped in (False, True):
        cfg = example_case(1, swapped, tau0=args.tau0)
        t = time.perf_counter()
        rep = convergence_study(cfg)
        rep.write_csv(Path(args.out) / cfg.name)
        print(rep.table())
        print(f"({time.perf_counter() - t:.0f} s)\n")


if __name__ == "__main__":
    main()
