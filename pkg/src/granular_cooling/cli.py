"""Command-line front end.

Exit codes: 0 success, 1 failed verdict under ``--strict``, 2 usage or
configuration error, 3 numerical failure.
"""

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, InvariantViolation, NumericError

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _cell(value):
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    return str(value)


def emit(header, rows, fmt, out=None):
    """Print ``rows`` as an aligned table or as CSV."""
    out = sys.stdout if out is None else out
    cells = [[_cell(v) for v in row] for row in rows]
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(cells)
        return
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    out.write("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    out.write("  ".join("-" * w for w in widths) + "\n")
    for r in cells:
        out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def write_manifest(path, config_echo, seed, started, outputs, status="ok", extra=None):
    manifest = {
        "config": config_echo,
        "seed": seed,
        "started": started,
        "finished": _now(),
        "outputs": outputs,
        "code_version": __version__,
        "status": status,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands

def cmd_run(args):
    from .config import load_run_config
    from .dsmc import RunAborted, run

    cfg = load_run_config(args.config, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.config))[0]
    csv_path = os.path.join(args.out_dir, f"{stem}.csv")
    manifest_path = os.path.join(args.out_dir, f"{stem}.manifest.json")
    started = _now()
    try:
        series = run(cfg)
    except RunAborted as exc:
        exc.series.to_csv(csv_path)
        write_manifest(manifest_path, cfg.as_dict(), cfg.seed, started, [csv_path], status="aborted", extra={"error": str(exc)})
        print(f"numerical failure: {exc}; partial output in {csv_path}", file=sys.stderr)
        return EXIT_NUMERIC
    series.to_csv(csv_path)
    write_manifest(manifest_path, cfg.as_dict(), cfg.seed, started, [csv_path], extra={"run": series.meta})
    rows = [
        ("rows", len(series)),
        ("t_final", float(series.t[-1])),
        ("E_final", float(series["E"][-1])),
        ("collisions", int(series["collisions"][-1])),
        ("csv", csv_path),
        ("manifest", manifest_path),
    ]
    emit(["quantity", "value"], rows, args.format)
    return EXIT_OK


def cmd_thresholds(args):
    from .moments import constant_threshold, ell0_threshold

    given = [v is not None for v in (args.gamma, args.A, args.rho)]
    if any(given) and not all(given):
        raise UsageError("--gamma, --A and --rho must be given together")
    if all(given):
        rep = ell0_threshold(args.gamma, args.A, args.rho)
    else:
        rep = constant_threshold()
    rows = [(name, value) for name, value in rep.rows()]
    if rep.capped:
        rows.append(("capped", True))
    emit(["quantity", "value"], rows, args.format)
    return EXIT_OK


def cmd_inequalities(args):
    from .entropy import check_inequalities, standard_family

    seed = 0 if args.seed is None else args.seed
    family = standard_family(seed=seed, n_mixtures=args.mixtures, n_balls=args.balls)
    rep = check_inequalities(family)
    checks = sorted({r["check"] for r in rep.rows})
    rows = []
    for check in checks:
        sub = [r for r in rep.rows if r["check"] == check]
        worst = min(sub, key=lambda r: r["slack"])
        n_bad = sum(1 for r in rep.violations if r["check"] == check)
        rows.append((check, len(sub), n_bad, worst["slack"], worst["member"]))
    emit(["check", "members", "violations", "worst_slack", "worst_member"], rows, args.format)
    if args.format == "table":
        print(f"total violations: {len(rep.violations)}")
    return EXIT_VERDICT if args.strict and not rep.ok else EXIT_OK


def cmd_fit(args):
    from .haff import check_sandwich, fit_decay, theory_exponent
    from .timeseries import TimeSeries

    try:
        series = TimeSeries.read_csv(args.csv)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc.strerror}") from exc
    except (ValueError, StopIteration) as exc:
        raise ConfigError(f"{args.csv} is not a time-series CSV: {exc}") from exc
    if args.column not in series:
        raise ConfigError(f"{args.csv} has no column {args.column!r}")
    window = None
    if args.t_lo is not None or args.t_hi is not None:
        t = series.t
        window = (args.t_lo if args.t_lo is not None else float(t[t > 0].min()), args.t_hi if args.t_hi is not None else float(t.max()))
    fit = fit_decay(series, args.column, window)
    rows = [
        ("exponent", fit.exponent),
        ("prefactor", fit.prefactor),
        ("residual", fit.residual),
        ("n_points", fit.n_points),
        ("t_lo", fit.window[0]),
        ("t_hi", fit.window[1]),
    ]
    passed = True
    if args.gamma is not None:
        sw = check_sandwich(series, args.gamma, fit.window, ratio_bound=args.ratio_bound)
        rows += [
            ("theory_exponent", theory_exponent(args.gamma)),
            ("c_hat", sw.c_hat),
            ("C_hat", sw.C_hat),
            ("ratio", sw.ratio),
            ("sandwich_pass", sw.passed),
        ]
        passed = sw.passed
    emit(["quantity", "value"], rows, args.format)
    return EXIT_VERDICT if args.strict and not passed else EXIT_OK


def cmd_validate_model(args):
    from .config import load_model
    from .dissipation import verify_psi_shape
    from .restitution import check_assumptions, default_grid, describe

    model = load_model(args.config)
    rep = check_assumptions(model)
    shape = verify_psi_shape(model, default_grid(n=512))
    rows = [(label, ok, "" if w is None else w) for label, ok, w in rep.rows()]
    rows.append(("Psi monotone on grid", shape.monotone, shape.worst_pair[0]))
    rows.append(("Psi convex on grid", shape.convex, shape.worst_triple[1]))
    rows.append((f"ell_gamma = {rep.ell_gamma:.6g}", True, ""))
    emit(["check", "pass", "witness"], rows, args.format)
    if args.format == "table":
        print(f"model: {describe(model)}")
        for note in rep.notes:
            print(f"note: {note}")
    passed = rep.ok and shape.monotone and shape.convex
    return EXIT_VERDICT if args.strict and not passed else EXIT_OK


def cmd_report(args):
    from .config import load_matrix_config
    from .haff import SUMMARY_COLUMNS, experiment_matrix

    cfg = load_matrix_config(args.config, seed=args.seed)
    started = _now()
    rep = experiment_matrix(cfg, args.out_dir)
    manifest_path = os.path.join(args.out_dir, "report.manifest.json")
    echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.__dict__.items()}
    write_manifest(manifest_path, echo, cfg.seed, started, rep.files, status="ok" if rep.ok else "partial",
                   extra={"failures": [list(f) for f in rep.failures]})
    emit(SUMMARY_COLUMNS, [[row[c] for c in SUMMARY_COLUMNS] for row in rep.rows], args.format)
    if rep.failures:
        for tag, msg in rep.failures:
            print(f"run {tag} failed: {msg}", file=sys.stderr)
    bad = not rep.ok or any(not (math.isfinite(r["c_hat"]) and r["c_hat"] > 0) for r in rep.rows)
    return EXIT_VERDICT if args.strict and bad else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="override the seed")
    parser.add_argument("--format", choices=("table", "csv"), default=argparse.SUPPRESS if suppress else "table")
    parser.add_argument("--strict", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="exit 1 when a verdict fails")
    parser.add_argument("--out-dir", default=argparse.SUPPRESS if suppress else ".", help="directory for output files")


def build_parser():
    parser = _Parser(prog="granular-cooling", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a DSMC simulation from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("thresholds", help="print weak-inelasticity thresholds")
    p.add_argument("--gamma", type=float)
    p.add_argument("--A", type=float)
    p.add_argument("--rho", type=float, help="m_{3/2} / E^{3/2} at the starting time")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("inequalities", help="check the moment/entropy inequalities on analytic families")
    p.add_argument("--mixtures", type=int, default=100)
    p.add_argument("--balls", type=int, default=20)
    p.set_defaults(func=cmd_inequalities)

    p = sub.add_parser("fit", help="fit a decay exponent to a time-series CSV")
    p.add_argument("csv")
    p.add_argument("--gamma", type=float, help="model exponent for the sandwich check")
    p.add_argument("--column", default="E")
    p.add_argument("--t-lo", type=float)
    p.add_argument("--t-hi", type=float)
    p.add_argument("--ratio-bound", type=float, default=10.0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate-model", help="check a restitution model's structural properties")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate_model)

    p = sub.add_parser("report", help="run the experiment matrix and write a summary")
    p.add_argument("config")
    p.set_defaults(func=cmd_report)

    for sp in sub.choices.values():
        _global_flags(sp, suppress=True)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, InvariantViolation) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
