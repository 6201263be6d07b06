"""Command-line entry point: ``fluidiqr <subcommand> ...``.

Subcommands
-----------
synth      generate a labelled synthetic dataset
decompose  write trend/seasonal/remainder components
detect     decompose, fence the remainder, write the per-hour report
eval       score a detection report against labels (and revenue)
compare    run the four standard pipelines side by side

Exit status is 0 on success, 2 on a usage error and 1 on a data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decomposition import (
    DEFAULT_MEDIAN_SPAN,
    DEFAULT_SEASONAL_WINDOW,
    PERIODIC,
    StlParams,
    mstl_fit,
    stl_fit,
    twitter_fit,
    write_decomposition,
)
from .detection import INNER, OUTER, FenceConfig, FenceMode, detect, write_report
from .errors import DataError, FluidIQRError
from .evaluation import (
    ALL_PIPELINES,
    Pipeline,
    compare_methods,
    confusion_metrics,
    EvalReport,
    hour_of_week_median,
    tadr,
    write_table,
)
from .synth import Profile, SynthConfig, generate_series
from .timeseries import (
    atomic_write_text,
    ingest_csv,
    parse_timestamp,
    read_labels,
    sidecar_path,
    write_csv,
)

logger = logging.getLogger("fluidiqr")

FENCES = {"inner": FenceMode.STANDARD_INNER, "outer": FenceMode.STANDARD_OUTER,
          "fluid": FenceMode.FLUID}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _g(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _periods(text):
    try:
        out = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid period list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty period list")
    return out


def _window(text):
    if text.lower() == PERIODIC:
        return PERIODIC
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid window {text!r}") from None


def _methods(text):
    out = []
    for name in text.split(","):
        name = name.strip().upper()
        if name not in Pipeline.__members__:
            raise argparse.ArgumentTypeError(f"unknown method {name.lower()!r}")
        out.append(Pipeline[name])
    return out


def _add_decomposition_args(p, default_method):
    p.add_argument("--method", choices=["stl", "mstl", "twitter"], default=default_method)
    p.add_argument("--periods", type=_periods, default=None,
                   help="comma-separated seasonal periods (default: 24 for stl/twitter, "
                        "24,168 for mstl)")
    p.add_argument("--robust", action=argparse.BooleanOptionalAction, default=True,
                   help="robust LOESS fitting (default: on)")
    p.add_argument("--seasonal-window", type=_window, default=DEFAULT_SEASONAL_WINDOW)
    p.add_argument("--rounds", type=int, default=2, help="MSTL refinement rounds")
    p.add_argument("--median-span", type=int, default=DEFAULT_MEDIAN_SPAN,
                   help="block length in hours of the piecewise median (twitter)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fluidiqr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a labelled synthetic dataset")
    p.add_argument("--profile", type=str.upper, choices=[x.value for x in Profile], default="D3")
    p.add_argument("--days", type=int, default=SynthConfig.days)
    p.add_argument("--seed", type=int, default=SynthConfig.seed)
    p.add_argument("--m-d", type=float, default=SynthConfig.m_d)
    p.add_argument("--m-w", type=float, default=SynthConfig.m_w)
    p.add_argument("--m-t", type=float, default=SynthConfig.m_t)
    p.add_argument("--sigma", type=float, default=SynthConfig.sigma)
    p.add_argument("--outlier-rate", type=float, default=SynthConfig.outlier_rate)
    p.add_argument("--start", type=str, default=None,
                   help="first timestamp, e.g. 2017-05-01T00:00:00Z")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("decompose", help="write decomposition components")
    p.add_argument("--input", type=Path, required=True)
    _add_decomposition_args(p, "mstl")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("detect", help="fence the remainder and write a report")
    p.add_argument("--input", type=Path, required=True)
    _add_decomposition_args(p, "mstl")
    p.add_argument("--fence", choices=list(FENCES), default="fluid")
    p.add_argument("--w-low", type=float, default=OUTER,
                   help="fluid multiplier at the lowest activity")
    p.add_argument("--w-high", type=float, default=INNER,
                   help="fluid multiplier at the highest activity")
    p.add_argument("--transform", action=argparse.BooleanOptionalAction, default=None,
                   help="asinh-transform the remainder (default: only for the fluid fence)")
    p.add_argument("--session-transform", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="score a detection report")
    p.add_argument("--report", type=Path, required=True, help="CSV written by `detect`")
    p.add_argument("--labels", type=Path, default=None, help="CSV with a label column")
    p.add_argument("--input", type=Path, default=None, help="canonical CSV for revenue")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("compare", help="run several pipelines and tabulate metrics")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--labels", type=Path, default=None)
    p.add_argument("--methods", type=_methods, default=list(ALL_PIPELINES))
    p.add_argument("--out", type=Path, required=True)
    return parser


def _check_out(args):
    out = args.out.resolve()
    for name in ("input", "labels", "report"):
        src = getattr(args, name, None)
        if src is not None and src.resolve() in (out, sidecar_path(out)):
            raise UsageError(f"--out would overwrite the {name} file {src}")


def _decomposition_setup(args):
    periods = args.periods or ([24, 168] if args.method == "mstl" else [24])
    if args.method != "mstl" and len(periods) != 1:
        raise UsageError(f"--method {args.method} takes exactly one period")
    if any(b <= a for a, b in zip(periods, periods[1:])):
        raise UsageError("--periods must be strictly ascending")
    if args.rounds < 1:
        raise UsageError("--rounds must be positive")
    if args.method == "twitter" and args.median_span < periods[0]:
        raise UsageError("--median-span must be at least the period")
    try:
        params = [StlParams(p, seasonal_window=args.seasonal_window, robust=args.robust)
                  for p in periods]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return periods, params


def _decompose(args, data, periods, params):
    series = data.base
    if args.method == "stl":
        return stl_fit(series, params[0])
    if args.method == "twitter":
        return twitter_fit(series, periods[0], args.median_span, args.seasonal_window)
    return mstl_fit(series, periods, params, rounds=args.rounds)


def cmd_synth(args):
    start = None
    if args.start:
        try:
            start = parse_timestamp(args.start)
        except ValueError as exc:
            raise UsageError(f"--start: {exc}") from None
    try:
        kwargs = dict(days=args.days, m_d=args.m_d, m_w=args.m_w, m_t=args.m_t,
                      sigma=args.sigma, outlier_rate=args.outlier_rate, seed=args.seed,
                      profile=Profile(args.profile))
        if start is not None:
            kwargs["start_time"] = start
        config = SynthConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    labelled = generate_series(config)
    ecom = labelled.to_ecom()
    write_csv(args.out, ecom, extra={"label": labelled.labels.astype(int)},
              include_conversion=True)
    atomic_write_text(sidecar_path(args.out), json.dumps(config.to_dict(), indent=2) + "\n")
    print(f"wrote {len(ecom)} rows, {int(labelled.labels.sum())} labelled outliers "
          f"to {args.out}")


def cmd_decompose(args):
    periods, params = _decomposition_setup(args)
    data = ingest_csv(args.input)
    decomp = _decompose(args, data, periods, params)
    write_decomposition(args.out, decomp)
    print(f"{decomp.method.value}: max reconstruction error "
          f"{_g(decomp.reconstruction_error())}, remainder sd {_g(np.std(decomp.remainder))}")


def cmd_detect(args):
    periods, params = _decomposition_setup(args)
    try:
        fence = FenceConfig(FENCES[args.fence], args.w_low, args.w_high, args.transform,
                            args.session_transform)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = ingest_csv(args.input)
    decomp = _decompose(args, data, periods, params)
    report = detect(decomp.remainder, fence, data.sessions)
    write_report(args.out, report, data.start_time)
    print(f"{report.method}: {report.total_flags} of {report.values.size} hours flagged")


def _report_flags(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "flag" not in (reader.fieldnames or []):
            raise DataError("report has no flag column", column="flag", path=path)
        rows = list(reader)
    flags = []
    for i, row in enumerate(rows, start=1):
        if row["flag"] not in ("0", "1"):
            raise DataError(f"bad flag {row['flag']!r}", row=i, column="flag", path=path)
        flags.append(row["flag"] == "1")
    return np.array(flags, dtype=bool), rows


def cmd_eval(args):
    flags, _ = _report_flags(args.report)
    method = "REPORT"
    summary = sidecar_path(args.report)
    if summary.exists():
        method = json.loads(summary.read_text(encoding="utf-8")).get("method", method)
    if args.labels is not None:
        labels = read_labels(args.labels)
        base = confusion_metrics(labels, flags)
    else:
        base = EvalReport(total_outliers=int(flags.sum()))
    value = None
    if args.input is not None:
        data = ingest_csv(args.input)
        if data.revenue is not None:
            medians = hour_of_week_median(data.revenue, data.start_time)
            value = tadr(flags, data.revenue, medians, data.start_time)
    result = EvalReport(base.total_outliers, base.matrix, base.accuracy, base.sensitivity,
                        base.specificity, value, method)
    write_table(args.out, [result])
    _print_table([result])


def cmd_compare(args):
    data = ingest_csv(args.input)
    labels = read_labels(args.labels) if args.labels is not None else None
    reports = compare_methods(data, args.methods, labels=labels)
    write_table(args.out, reports)
    _print_table(reports)


def _print_table(reports):
    print(f"{'method':<8} {'outliers':>8} {'accuracy':>9} {'sens':>9} {'spec':>9} {'tadr':>11}")
    for r in reports:
        print(f"{r.method:<8} {r.total_outliers:>8} {_g(r.accuracy):>9} {_g(r.sensitivity):>9} "
              f"{_g(r.specificity):>9} {_g(r.tadr):>11}")


COMMANDS = {"synth": cmd_synth, "decompose": cmd_decompose, "detect": cmd_detect,
            "eval": cmd_eval, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        _check_out(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"fluidiqr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FluidIQRError, OSError) as exc:
        print(f"fluidiqr {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
