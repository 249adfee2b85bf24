"""Command-line driver for the eigenvalue experiments.

Modes
-----
uniform-morley   lower-bound eigenvalues on uniformly refined triangle meshes
uniform-bfs      upper-bound eigenvalues on uniformly refined rectangle meshes
adaptive-morley  estimator-driven adaptive run on the L-shape (or square)
verify           monotonicity / bracketing / slope checks on existing CSVs
"""

import argparse
import sys

from .adaptive import AdaptiveConfig
from .report import (
    read_csv,
    run_adaptive,
    run_uniform_bfs,
    run_uniform_morley,
    slope_report,
    verify_bracket,
    verify_monotone,
    write_csv,
)


def _build_parser():
    p = argparse.ArgumentParser(
        prog="platebounds",
        description="Clamped-plate vibration eigenvalue bounds "
        "(nonconforming lower / conforming upper).",
    )
    p.add_argument(
        "--mode",
        required=True,
        choices=["uniform-morley", "uniform-bfs", "adaptive-morley", "verify"],
    )
    p.add_argument("--domain", choices=["square", "lshape"], default="square")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--levels", type=int, help="refinement levels (uniform modes)")
    p.add_argument("--max-dof", type=int, help="DOF budget (adaptive mode)")
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--eig-index", type=int, choices=[1, 2], default=1)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--initial-n", type=int, help="squares per unit side of the initial mesh")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dump-mesh", help="path prefix for per-iteration mesh dumps")
    p.add_argument("--check", choices=["monotone", "bracket", "slope"],
                   help="verify mode: which check to run")
    p.add_argument("--csv", help="verify mode: input CSV")
    p.add_argument("--bfs-csv", help="verify mode (bracket): BFS CSV")
    p.add_argument("--window", type=int, default=10, help="verify mode (slope)")
    return p


def _print_table(records):
    print("method,domain,tau,iter,h,ndof,lambda1,lambda2,eta2")
    for r in records:
        lam = list(r.lambdas) + [float("nan")] * 2
        h = f"{r.h:.6f}" if r.h is not None else ""
        eta = f"{r.eta2:.6g}" if r.eta2 is not None else ""
        print(
            f"{r.method},{r.domain},{r.tau:g},{r.iteration},{h},{r.ndof},"
            f"{lam[0]:.3f},{lam[1]:.3f},{eta}"
        )


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.mode in ("uniform-morley", "uniform-bfs"):
            if args.levels is None:
                parser.error("--levels is required for uniform modes")
            run = run_uniform_morley if args.mode == "uniform-morley" else run_uniform_bfs
            records = run(args.domain, args.tau, args.levels, k=args.k, seed=args.seed)
        elif args.mode == "adaptive-morley":
            if args.max_dof is None:
                parser.error("--max-dof is required for adaptive mode")
            config = AdaptiveConfig(
                domain=args.domain if args.domain else "lshape",
                tau=args.tau,
                theta=args.theta,
                j=args.eig_index,
                k=max(args.k, args.eig_index),
                max_dof=args.max_dof,
                initial_n=args.initial_n,
                seed=args.seed,
                dump_mesh=args.dump_mesh,
            )
            records = run_adaptive(config)
        else:  # verify
            if args.check is None or args.csv is None:
                parser.error("verify mode needs --check and --csv")
            records = read_csv(args.csv)
            if args.check == "monotone":
                ok, msg = verify_monotone(records)
                print(msg)
                return 0 if ok else 1
            if args.check == "bracket":
                if args.bfs_csv is None:
                    parser.error("bracket check needs --bfs-csv")
                ok, lines = verify_bracket(records, read_csv(args.bfs_csv))
                for line in lines:
                    print(line)
                print(f"bracket: {'true' if ok else 'false'}")
                return 0 if ok else 1
            slope = slope_report(records, window=args.window)
            print(f"slope: {slope:.6f}")
            return 0
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_table(records)
    if args.out:
        write_csv(records, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
