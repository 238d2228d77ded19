"""Command-line front end.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or validation error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .errors import ProjSymError
from .lab import CONTROLS, EXACT_TOL, N_PERM, TestReport, run_exact_suite, run_statistical_suite
from .projector import check_dims, draw_projections
from .rng import X_VECTOR, RandomStream

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

SAMPLE_HEADER = ["stream_index", "alpha", "perp_norm"]
REPORT_HEADER = ["kind", "name", "seed", "n", "statistic", "p_value", "max_residual", "tol", "alpha", "pass"]

DEFAULT_TRIALS = {"sample": 1000, "check-exact": 1000, "check-stat": 4000, "report": 4000}


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """Shortest round-trip text for a float; ints and strings pass through."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _seeds(text):
    try:
        return [int(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError("seeds must be a comma-separated list of integers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int, help="ambient dimension (default 8; inferred from --x-file)")
    common.add_argument("--m", type=int, help="subspace dimension (default 2)")
    common.add_argument("--trials", type=int, help="samples per side / number of configurations")
    common.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    common.add_argument("--seeds", type=_seeds, help="comma-separated seeds (default: 20 consecutive from --seed)")
    common.add_argument("--alpha", type=float, default=0.01, help="significance level (default 0.01)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", dest="output_format")
    common.add_argument("--out", help="output path (default: standard output)")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--x-file", help="file holding one whitespace-separated vector x")
    src.add_argument("--x-basis", type=int, metavar="K", help="use the basis vector e_K (0-based) as x")
    common.add_argument("--negative-control", choices=CONTROLS, default="none")
    common.add_argument("--angle", type=float, default=45.0, help="off-axis control angle in degrees")
    common.add_argument("--tol", type=float, default=EXACT_TOL, help="exact-tier tolerance (debug override)")
    common.add_argument("--permutations", type=int, default=N_PERM, help="energy-test permutations")
    common.add_argument("--workers", type=int, default=1, help="worker threads (output does not depend on it)")

    parser = argparse.ArgumentParser(
        prog="projsym",
        description="Random Gaussian subspace projection and checks of its symmetries about x.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="dump samples of Px")
    sub.add_parser("check-exact", parents=[common], help="exact equivariance identities")
    sub.add_parser("check-stat", parents=[common], help="Monte Carlo equality-in-distribution suite")
    rep = sub.add_parser("report", parents=[common], help="exact tier plus statistical suite")
    rep.add_argument("--exact-trials", type=int, default=1000, help="exact-tier configurations (default 1000)")
    return parser


def read_x_file(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        x = np.array([float(t) for t in text.split()])
    except ValueError:
        raise UsageError(f"{path}: expected whitespace-separated numbers")
    if x.size == 0:
        raise UsageError(f"{path}: no numbers found")
    return x


def resolve_x(args, p):
    """Returns (x, x_source) following --x-file / --x-basis / seeded random unit."""
    if args.x_file:
        x = read_x_file(args.x_file)
        if p is not None and p != x.size:
            raise UsageError(f"--p {p} does not match the {x.size} entries of --x-file")
        return x, "file"
    p = 8 if p is None else p
    if args.x_basis is not None:
        if not 0 <= args.x_basis < p:
            raise UsageError("--x-basis K must satisfy 0 <= K < p")
        x = np.zeros(p)
        x[args.x_basis] = 1.0
        return x, f"basis-vector {args.x_basis}"
    x = RandomStream(args.seed, (X_VECTOR,)).standard_normal(p)
    return x / np.linalg.norm(x), "random-unit"


def validate(args):
    if args.p is not None and args.p < 1:
        raise UsageError("p must be >= 1")
    if args.trials is not None and args.trials < 1:
        raise UsageError("trials must be >= 1")
    if not 0 < args.alpha < 1:
        raise UsageError("alpha must satisfy 0 < alpha < 1")
    if args.tol <= 0:
        raise UsageError("tol must be positive")
    if args.workers < 1:
        raise UsageError("workers must be >= 1")
    if args.permutations < 99:
        raise UsageError("permutations must be >= 99")


def run_config(args, x, x_source, p, m, trials, seeds) -> dict:
    """Echo of everything needed to reproduce the run (output path and workers excluded)."""
    cfg = {
        "command": args.command,
        "p": p,
        "m": m,
        "trials": trials,
        "seed": args.seed,
        "seeds": seeds,
        "alpha": args.alpha,
        "x_source": x_source,
        "output_format": args.output_format,
        "negative_control": args.negative_control,
        "angle": args.angle,
        "tol": args.tol,
        "permutations": args.permutations,
    }
    if x is not None:
        cfg["x"] = [float(v) for v in x]
    if args.command == "report":
        cfg["exact_trials"] = args.exact_trials
    return cfg


def sample_csv(batch) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    p = batch.px.shape[1]
    w.writerow(SAMPLE_HEADER + [f"px_{i}" for i in range(p)])
    for i, a, r, px in zip(batch.stream_index, batch.alpha, batch.perp_norm, batch.px):
        w.writerow([int(i), fmt(a), fmt(r)] + [fmt(v) for v in px])
    return buf.getvalue()


def sample_json(batch, cfg) -> str:
    rows = [
        {"stream_index": int(i), "alpha": float(a), "perp_norm": float(r), "px": [float(v) for v in px]}
        for i, a, r, px in zip(batch.stream_index, batch.alpha, batch.perp_norm, batch.px)
    ]
    return json.dumps({"config": cfg, "samples": rows}, indent=2) + "\n"


def report_csv(report: TestReport) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(report.config, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for c in report.exact_checks:
        w.writerow(["exact", c.check_name, "", c.trials, "", "", fmt(c.max_residual), fmt(c.tol), "", fmt(c.pass_)])
    for t in report.stat_tests:
        w.writerow(["stat", t.test_name, fmt(t.seed), t.n_samples, fmt(t.statistic), fmt(t.p_value),
                    "", "", fmt(t.alpha), fmt(not t.reject)])
    w.writerow(["overall", "overall_pass", "", "", "", "", "", "", "", fmt(report.overall_pass)])
    return buf.getvalue()


def emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _exact_report(args, x, p, m, trials, cfg):
    exact = run_exact_suite(trials, args.seed, p=p, m=m, x=x, tol=args.tol, workers=args.workers)
    return TestReport(cfg, exact, [], 0)


def run(args) -> int:
    validate(args)
    cmd = args.command
    trials = args.trials if args.trials is not None else DEFAULT_TRIALS[cmd]
    seeds = args.seeds if args.seeds is not None else list(range(args.seed, args.seed + 20))
    if not seeds:
        raise UsageError("need at least one seed")

    if cmd == "check-exact":
        # without --p/--m/x each configuration draws its own dimensions and x
        x, x_source, p = None, "random-per-trial", args.p
        if args.x_file or args.x_basis is not None:
            x, x_source = resolve_x(args, args.p)
            p = x.size
        if args.m is not None:
            if p is None:
                raise UsageError("--m needs --p or an explicit x for check-exact")
            check_dims(p, args.m)
        cfg = run_config(args, x, x_source, p, args.m, trials, [args.seed])
        report = _exact_report(args, x, p, args.m, trials, cfg)
    else:
        x, x_source = resolve_x(args, args.p)
        p = x.size
        m = args.m if args.m is not None else min(2, p)
        check_dims(p, m)
        if cmd == "sample":
            cfg = run_config(args, x, x_source, p, m, trials, [args.seed])
            batch = draw_projections(x, m, trials, args.seed, workers=args.workers)
            text = sample_csv(batch) if args.output_format == "csv" else sample_json(batch, cfg)
            emit(text, args.out)
            return EXIT_OK
        if trials < 1000:
            print(f"warning: {trials} trials per side is below the recommended 1000", file=sys.stderr)
        cfg = run_config(args, x, x_source, p, m, trials, seeds)
        report = run_statistical_suite(
            x, m, trials, seeds, alpha=args.alpha, control=args.negative_control, angle=args.angle,
            n_perm=args.permutations, exact_tol=args.tol, workers=args.workers, min_n=1,
        )
        report.config = cfg
        if cmd == "report":
            exact = run_exact_suite(args.exact_trials, args.seed, tol=args.tol, workers=args.workers)
            report.exact_checks = exact

    text = report_csv(report) if args.output_format == "csv" else report.to_json()
    emit(text, args.out)
    return EXIT_OK if report.overall_pass else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except UsageError as err:
        print(f"projsym: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"projsym: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ProjSymError, ValueError) as err:
        print(f"projsym: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
