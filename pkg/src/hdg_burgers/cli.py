"""Command line front end for the convergence harness."""

import argparse
import os
import sys


def _cap_threads():
    # HDG_THREADS optionally caps BLAS-level parallelism; must be exported
    # before numpy initializes its backend.
    cap = os.environ.get("HDG_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


_cap_threads()


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hdg-burgers",
        description="Hybridized DG solver for the viscous Burgers equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a manufactured-solution convergence study")
    run.add_argument("--example", type=int, choices=(1, 2, 3), required=True)
    run.add_argument("--nu", type=float, default=None,
                     help="viscosity (defaults to the example's table value)")
    run.add_argument("--scheme", choices=("be", "dirk23"), required=True)
    run.add_argument("--k", type=int, required=True, help="scalar polynomial degree (>=1)")
    run.add_argument("--l-mode", choices=("equal", "minus"), default="equal",
                     help="face degree: equal (l=k) or minus (l=k-1)")
    run.add_argument("--meshes", required=True,
                     help="comma-separated subdivisions, e.g. 4,8,16")
    run.add_argument("--dt-rule", required=True,
                     help="paper-k1 | paper-k2 | fixed:<dt> | ladder:<dt,dt,...>")
    run.add_argument("--dim", type=int, choices=(2, 3), default=None,
                     help="space dimension (must match the example)")
    run.add_argument("--out", choices=("csv", "md"), default="md")
    run.add_argument("--out-file", default=None)
    run.add_argument("--oseen-tol", type=float, default=1e-10)
    run.add_argument("--oseen-max", type=int, default=50)
    run.add_argument("--monitor-energy", action="store_true",
                     help="append per-step scalar norms to a sidecar CSV")
    return parser


def _run(args):
    from .cases import make_case
    from .harness import emit_report, run_convergence

    if args.k < 1:
        raise ValueError("--k must be >= 1")
    case = make_case(args.example, args.nu)
    if args.dim is not None and args.dim != case.dim:
        raise ValueError(
            f"--dim {args.dim} conflicts with example {args.example} (dim {case.dim})"
        )
    meshes = [int(m) for m in args.meshes.split(",") if m]
    energy_rows = [] if args.monitor_energy else None
    report = run_convergence(
        case,
        args.scheme,
        args.k,
        args.l_mode,
        meshes,
        args.dt_rule,
        oseen_tol=args.oseen_tol,
        oseen_max=args.oseen_max,
        energy_sink=energy_rows,
    )
    text = emit_report(report, args.out)
    if args.out_file:
        with open(args.out_file, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if energy_rows is not None:
        sidecar = (args.out_file or "energy") + ".energy.csv" \
            if args.out_file else "energy.csv"
        with open(sidecar, "w") as fh:
            fh.write("mesh,step,time,u_norm\n")
            for label, n, t, norm in energy_rows:
                fh.write(f"{label},{n},{t:.10g},{norm:.17g}\n")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:
        print(f"hdg-burgers: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
