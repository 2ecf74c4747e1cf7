"""Command-line entry point.

Exit status: 0 success, 1 usage error, 2 data or parse error, 3 numerical failure.
Default quadrature tolerance can be overridden with the SELENTROPY_QUAD_TOL
environment variable.
"""

from __future__ import annotations

import argparse
import math
import sys
from collections import OrderedDict

from . import analysis, constants, montecarlo
from .errors import BracketError, ConfigError, DataError, DomainError, QuadratureError
from .estimators import TARGETS, WORSE, default_estimators, parse_estimator
from .svgplot import line_chart

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text):
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text):
    """``start:stop:count`` (inclusive, evenly spaced) or a comma list."""
    if ":" in text:
        try:
            start, stop, count = text.split(":")
            start, stop, count = float(start), float(stop), int(count)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:count") from None
        if count < 1:
            raise argparse.ArgumentTypeError("grid count must be at least 1")
        if count == 1:
            return [start]
        return [start + (stop - start) * k / (count - 1) for k in range(count)]
    return _float_list(text)


def _add_sim_args(p):
    p.add_argument("--alpha", type=float, required=True, help="common shape of the two totals")
    p.add_argument("--target", choices=TARGETS, default=WORSE)
    p.add_argument("--grid", type=_grid, default=None,
                   help="mu values >= 1 as start:stop:count or a comma list (default 1, 1.25, ..., 10)")
    p.add_argument("--reps", type=int, default=montecarlo.DEFAULT_REPS)
    p.add_argument("--seed", type=int, default=montecarlo.DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=None, help="threads (results do not depend on this)")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")


def build_parser():
    parser = _Parser(prog="selentropy", description="Entropy estimation after selecting one of two gamma populations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("table", help="table of boundary constants")
    p.add_argument("--alphas", type=_float_list, default=list(constants.TABLE_ALPHAS))
    p.add_argument("--csv", action="store_true", help="full-precision CSV instead of a text table")
    p.add_argument("--digits", type=int, default=3)
    p.add_argument("--round", action="store_true", help="round instead of truncating in the text table")

    p = sub.add_parser("constants", help="constants for one shape value")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--csv", action="store_true")

    p = sub.add_parser("simulate", help="Monte Carlo risk and bias, written as CSV")
    _add_sim_args(p)
    p.add_argument("--estimator", action="append", default=None, metavar="FAMILY:PARAM",
                   help="e.g. shrink-worse:ln_alpha, genbayes-better:0.5 (repeatable); "
                        "default: the naive and shrinkage estimators for the target")

    p = sub.add_parser("dominance", help="paired risk comparison of two estimators")
    _add_sim_args(p)
    p.add_argument("--a", required=True, metavar="FAMILY:PARAM", help="estimator expected to dominate")
    p.add_argument("--b", required=True, metavar="FAMILY:PARAM", help="estimator expected to be dominated")

    p = sub.add_parser("analyze", help="two-sample data analysis report")
    p.add_argument("--a", help="first sample file (default: bundled plane 7913 data)")
    p.add_argument("--b", help="second sample file (default: bundled plane 7914 data)")
    p.add_argument("--shape", type=float, required=True, help="known shape of each observation")
    p.add_argument("--format", choices=analysis.FORMATS, default="whitespace")
    p.add_argument("--full-entropy", action="store_true", help="add the known entropy constant to every estimate")
    p.add_argument("--csv", action="store_true", help="machine-readable CSV instead of the text report")

    p = sub.add_parser("plot", help="SVG line chart of a risk CSV")
    p.add_argument("--csv", required=True, dest="csv_path")
    p.add_argument("--svg", required=True, dest="svg_path")
    p.add_argument("--column", action="append", default=None, help="y column(s), default mse")
    p.add_argument("--title", default="")
    return parser


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", encoding="utf-8", newline="")


def _write(path, writer):
    fh = _open_out(path)
    try:
        writer(fh)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _cmd_table(args):
    rows = constants.generate_table(args.alphas)
    if args.csv:
        constants.write_table_csv(rows, sys.stdout)
    else:
        sys.stdout.write(constants.format_table(rows, args.digits, truncate=not args.round))


def _cmd_constants(args):
    row = constants.ConstantsRow.compute(args.alpha)
    if args.csv:
        constants.write_table_csv([row], sys.stdout)
    else:
        for name in constants.COLUMNS:
            print(f"{name:<18} {getattr(row, name)!r}")


def _sim_config(args, estimators):
    grid = args.grid if args.grid is not None else list(montecarlo.DEFAULT_MU_GRID)
    return montecarlo.SimConfig(alpha=args.alpha, estimators=estimators, target=args.target,
                                mu_grid=grid, reps=args.reps, seed=args.seed)


def _check_alpha(alpha):
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ConfigError(f"--alpha must be positive, got {alpha!r}")


def _cmd_simulate(args):
    _check_alpha(args.alpha)
    if args.estimator:
        ests = [parse_estimator(s, args.alpha) for s in args.estimator]
    else:
        ests = default_estimators(args.target, args.alpha)
    cfg = _sim_config(args, ests)
    points = montecarlo.simulate_risk(cfg, workers=args.workers)
    _write(args.out, lambda fh: montecarlo.write_risk_csv(points, cfg, fh))


def _cmd_dominance(args):
    _check_alpha(args.alpha)
    a, b = parse_estimator(args.a, args.alpha), parse_estimator(args.b, args.alpha)
    cfg = _sim_config(args, (a, b))
    points = montecarlo.dominance_report(cfg, a, b, workers=args.workers)
    _write(args.out, lambda fh: montecarlo.write_dominance_csv(points, cfg, a, b, fh))
    flagged = [p.mu for p in points if p.flagged]
    summary = (f"{a.label} loses to {b.label} by more than 3 SE at mu = {flagged}" if flagged
               else f"no grid point where {a.label} loses to {b.label} by more than 3 SE")
    print(summary, file=sys.stderr)


def _load(path, fmt, default):
    if path is None:
        return analysis.bundled_sample(default)
    with open(path, "rb") as fh:
        return analysis.load_samples(fh, fmt, label=path)


def _cmd_analyze(args):
    a = _load(args.a, args.format, "plane7913")
    b = _load(args.b, args.format, "plane7914")
    report = analysis.analyze(a, b, args.shape)
    if args.csv:
        analysis.write_csv(report, sys.stdout, args.full_entropy)
    else:
        sys.stdout.write(analysis.render_text(report, args.full_entropy))


def _cmd_plot(args):
    columns = args.column or ["mse"]
    with open(args.csv_path, encoding="utf-8", newline="") as fh:
        try:
            rows = montecarlo.read_risk_csv(fh)
        except (KeyError, ValueError) as exc:
            raise DataError(f"{args.csv_path}: not a risk CSV ({exc})") from None
    if not rows:
        raise DataError(f"{args.csv_path}: no rows")
    for col in columns:
        if col not in rows[0]:
            raise ConfigError(f"unknown column {col!r}; available: {', '.join(rows[0])}")
    series = OrderedDict()
    for row in rows:
        for col in columns:
            name = row["estimator_label"] if len(columns) == 1 else f"{row['estimator_label']} {col}"
            xs, ys = series.setdefault(name, ([], []))
            xs.append(row["mu"])
            ys.append(float(row[col]))
    svg = line_chart([(k, xs, ys) for k, (xs, ys) in series.items()], title=args.title,
                     xlabel="mu", ylabel=", ".join(columns))
    with open(args.svg_path, "w", encoding="utf-8") as fh:
        fh.write(svg)


COMMANDS = {
    "table": _cmd_table,
    "constants": _cmd_constants,
    "simulate": _cmd_simulate,
    "dominance": _cmd_dominance,
    "analyze": _cmd_analyze,
    "plot": _cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except (QuadratureError, BracketError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

