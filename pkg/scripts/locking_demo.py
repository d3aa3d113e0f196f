"""Nearly incompressible straight-line case with mu- versus lambda-scaled penalties.

Both variants are measured against the mu-scaled fine-level reference.  With
the penalty weight growing like lambda the jump term dominates the stiffness:
each level is far from the reference and the error shrinks by the penalty's
own h^2 factor only, so a self-referenced rate would look healthy while the
values are useless.  The mu-scaled weight converges to the reference.
"""

import argparse

import numpy as np

from crifem.driver import estimate_order, example_case, run_eigen_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--N-ref", dest="N_ref", type=int, default=128)
    ap.add_argument("--m", type=int, default=4)
    args = ap.parse_args()
    ref = run_eigen_case(example_case(5, m=args.m, N_ref=args.N_ref + 1), args.N_ref).eigenvalues
    print(f"reference (mu scaling, N={args.N_ref}): {np.round(ref, 4)}")
    for scaling in ("mu", "lambda"):
        cfg = example_case(5, tau_scaling=scaling, m=args.m, N_ref=args.N_ref + 1)
        rel = []
        for N in args.levels:
            w = run_eigen_case(cfg, N).eigenvalues
            rel.append(np.abs(w - ref) / ref)
        rel = np.array(rel)
        print(f"\ntau scaling {scaling!r}: relative error of omega2_1..{args.m}")
        for k, N in enumerate(args.levels):
            orders = "" if k == 0 else "  orders " + " ".join(
                f"{estimate_order(rel[k - 1, i], rel[k, i], N / args.levels[k - 1]):5.2f}" for i in range(args.m))
            print(f"  N={N:4d}  " + " ".join(f"{e:9.2e}" for e in rel[k]) + orders)


if __name__ == "__main__":
    main()
