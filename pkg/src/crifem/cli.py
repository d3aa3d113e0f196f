"""Command line interface: ``crifem {eig,converge,source-verify,export-matrices,export-field}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import driver
from .export import export_field, export_matrices


def _case(args) -> driver.CaseConfig:
    if args.config:
        cfg = driver.load_config(args.config)
    elif args.example:
        num = int(args.example.rstrip("s"))
        cfg = driver.example_case(num, swapped=args.example.endswith("s"))
    else:
        raise SystemExit("give --config FILE or --example {1..5}[s]")
    kw = {}
    if getattr(args, "out", None):
        kw["output_dir"] = args.out
    if getattr(args, "m", None):
        kw["m"] = args.m
    if getattr(args, "tau0", None):
        kw["tau0"] = args.tau0
    if getattr(args, "levels", None):
        kw["levels"] = tuple(args.levels)
    if getattr(args, "N_ref", None):
        kw["N_ref"] = args.N_ref
    return replace(cfg, **kw) if kw else cfg


def _level(args, cfg):
    return args.N if args.N else cfg.levels[0]


def cmd_eig(args):
    cfg = _case(args)
    N = _level(args, cfg)
    res = driver.run_eigen_case(cfg, N)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eigenvalues.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "h", "index", "omega2", "residual"])
        for i, (v, r) in enumerate(zip(res.eigenvalues, res.eigenpairs.residuals), start=1):
            w.writerow([N, repr(2.0 / N), i, repr(float(v)), repr(float(r))])
    print(f"{cfg.name}  N={N}  h={2.0 / N:g}")
    for i, v in enumerate(res.eigenvalues, start=1):
        print(f"  omega2_{i} = {v:.6f}")


def cmd_converge(args):
    cfg = _case(args)
    rep = driver.convergence_study(cfg)
    rep.write_csv(cfg.output_dir)
    print(rep.table())


def cmd_source(args):
    exact = driver.Manufactured(args.mu, args.lam)
    results, l2r, enr = driver.source_convergence(tuple(args.levels), exact, tau0=args.tau0)
    print(f"{'N':>6}{'L2 error':>14}{'order':>8}{'energy error':>16}{'order':>8}")
    for k, r in enumerate(results):
        o1 = f"{l2r[k - 1]:8.3f}" if k else " " * 8
        o2 = f"{enr[k - 1]:8.3f}" if k else " " * 8
        print(f"{r.N:6d}{r.l2_error:14.4e}{o1}{r.energy_error:16.4e}{o2}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "source.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "h", "l2_error", "l2_order", "energy_error", "energy_order"])
            for k, r in enumerate(results):
                w.writerow([r.N, repr(2.0 / r.N), repr(r.l2_error), repr(l2r[k - 1]) if k else "nan",
                            repr(r.energy_error), repr(enr[k - 1]) if k else "nan"])


def cmd_export_matrices(args):
    cfg = _case(args)
    asm = driver.discretize(cfg, _level(args, cfg))
    for p in export_matrices(asm, cfg.output_dir):
        print(p)


def cmd_export_field(args):
    cfg = _case(args)
    if args.index > cfg.m:
        cfg = replace(cfg, m=args.index)
    res = driver.run_eigen_case(cfg, _level(args, cfg))
    u = res.eigenvector(args.index - 1)
    stem = Path(cfg.output_dir) / f"{cfg.name}_N{res.N}_mode{args.index}"
    for p in export_field(res.assembly.bases, u, stem):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crifem", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def case_args(sp):
        sp.add_argument("--config", help="INI case file")
        sp.add_argument("--example", help="preset 1..5, suffix 's' swaps mu- and mu+ (e.g. 1s)")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--m", type=int, help="number of eigenvalues")
        sp.add_argument("--tau0", type=float)

    sp = sub.add_parser("eig", help="smallest eigenvalues on one mesh level")
    case_args(sp)
    sp.add_argument("--N", type=int)
    sp.set_defaults(func=cmd_eig)

    sp = sub.add_parser("converge", help="convergence study against a fine reference level")
    case_args(sp)
    sp.add_argument("--levels", type=int, nargs="+")
    sp.add_argument("--N-ref", dest="N_ref", type=int)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("source-verify", help="manufactured-solution rates without interface")
    sp.add_argument("--levels", type=int, nargs="+", default=[8, 16, 32, 64])
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--tau0", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_source)

    sp = sub.add_parser("export-matrices", help="write A and M in Matrix Market format")
    case_args(sp)
    sp.add_argument("--N", type=int)
    sp.set_defaults(func=cmd_export_matrices)

    sp = sub.add_parser("export-field", help="write an eigenfunction as VTK and CSV")
    case_args(sp)
    sp.add_argument("--N", type=int)
    sp.add_argument("--index", type=int, default=1, help="1-based eigenpair index")
    sp.set_defaults(func=cmd_export_field)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
