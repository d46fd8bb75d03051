"""voltcast command line: ingest, diagnose, fit, forecast, backtest.

Exit codes: 0 success, 2 usage error, 3 data error, 4 convergence error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .arima import ArimaOrder
from .errors import ConvergenceError, DataError, EstimationError
from .ingest import CleaningPolicy, aggregate_monthly, clean_series, parse_hourly_csv, read_monthly, write_monthly
from .memforecast import ExperimentConfig, MemModel, fit_mem, forecast_mem, run_experiment, utc_meta
from .series import AGGREGATION_MODES, acf, describe, difference, log_transform, pacf, split_train_test
from .stattests import adf_test, jarque_bera

logger = logging.getLogger("voltcast")

EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 2, 3, 4


class UsageError(Exception):
    pass


def _year_month(text: str) -> tuple[int, int]:
    try:
        y, m = text.split("-")
        ym = int(y), int(m)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM, got {text!r}") from None
    if not 1 <= ym[1] <= 12:
        raise argparse.ArgumentTypeError(f"month out of range in {text!r}")
    return ym


def _order(n):
    def parse(text):
        try:
            vals = tuple(int(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}") from None
        if len(vals) != n or min(vals) < 0:
            raise argparse.ArgumentTypeError(f"expected {n} non-negative integers, got {text!r}")
        return vals

    return parse


def _alpha(text):
    a = float(text)
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return a


def _existing(path):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input not found: {p}")
    return p


def _write_json(doc, path):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands --------------------------------------------------------------


def cmd_ingest(args):
    src = _existing(args.input)
    hourly = parse_hourly_csv(src, args.ts_col, args.load_col, args.delimiter, args.ts_format, args.timezone)
    for err in hourly.rejected[:20]:
        print(f"line {err.line}: {err.message}", file=sys.stderr)
    if len(hourly.rejected) > 20:
        print(f"... {len(hourly.rejected) - 20} more rejected rows", file=sys.stderr)
    policy = CleaningPolicy(args.duplicates, args.max_gap, args.allow_long_gaps)
    cleaned, report = clean_series(hourly, policy)
    monthly = aggregate_monthly(cleaned, args.mode)
    extra = {"rows_read": hourly.rows_read, "rows_rejected": len(hourly.rejected), "timezone": hourly.timezone}
    write_monthly(monthly, args.out, report, extra)
    print(f"{len(monthly)} months ({monthly.start[0]}-{monthly.start[1]:02d}..{monthly.end[0]}-{monthly.end[1]:02d}), "
          f"mode={args.mode}, {hourly.rows_read} rows read, {len(hourly.rejected)} rejected, "
          f"{report.mutations} cleaning mutations -> {args.out}")
    return 0


def cmd_diagnose(args):
    series = read_monthly(_existing(args.input))
    variants = {"load": series, "diff": difference(series, 1), "log": log_transform(series)}
    report = {"input": str(args.input), "n": len(series), "max_lag": args.max_lag, "stats": {}, "correlogram": {}, "tests": {}}
    rows = []
    for name, s in variants.items():
        report["stats"][name] = describe(s).to_dict()
        a, p = acf(s, args.max_lag), pacf(s, args.max_lag)
        report["correlogram"][name] = [
            {"lag": x.lag, "acf": x.value, "pacf": y.value, "bound": x.confidence_bound} for x, y in zip(a, p)
        ]
        rows += [[name, x.lag, repr(x.value), repr(y.value), repr(x.confidence_bound)] for x, y in zip(a, p)]
    for name in ("load", "diff"):
        report["tests"][f"adf_{name}"] = adf_test(variants[name], regression=args.adf_regression, alpha=0.01).to_dict()
    report["tests"]["jarque_bera_load"] = jarque_bera(series).to_dict()
    report["tests"]["jarque_bera_diff"] = jarque_bera(variants["diff"]).to_dict()
    _write_json(report, args.out)
    if args.out:
        with open(Path(args.out).with_suffix(".correlogram.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series", "lag", "acf", "pacf", "bound"])
            w.writerows(rows)
        _print_diagnostics(report)
    return 0


def _print_diagnostics(report):
    stats = report["stats"]
    names = list(stats)
    print(f"{'':<20}" + "".join(f"{n:>18}" for n in names))
    for key in ("mean", "max", "min", "median", "std_dev", "skewness", "kurtosis_raw"):
        print(f"{key:<20}" + "".join(f"{stats[n][key]:>18.6g}" for n in names))
    for name, t in report["tests"].items():
        crit = t["detail"].get("critical_values")
        extra = f" crit={ {k: round(v, 3) for k, v in crit.items()} }" if crit else f" p={t['p_value']:.4g}"
        print(f"{name:<20} stat={t['statistic']:.4f}{extra} reject={t['reject']} (alpha={t['alpha']})")


def _load_split(args):
    series = read_monthly(_existing(args.input))
    if getattr(args, "train_end", None):
        series = split_train_test(series, args.train_end).train
    return series


def cmd_fit(args):
    series = _load_split(args)
    fit_series = log_transform(series) if args.log else series
    model = fit_mem(fit_series, args.arima, args.garch, args.dist, args.robust)
    if args.train_end:
        model.fitted_on["train_end"] = list(args.train_end)
    text = model.dumps(utc_meta(command="fit", seed=args.seed))
    if args.out:
        Path(args.out).write_text(text)
        print(f"ARIMA{ArimaOrder(*args.arima)}-GARCH({args.garch[0]},{args.garch[1]}) loglik="
              f"{model.arima.loglik:.3f}/{model.garch.loglik:.3f} -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_forecast(args):
    model = MemModel.loads(_existing(args.model).read_text())
    fc = forecast_mem(model, args.horizon, args.alpha)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, ["step", "month", "point", "lower", "upper", "std_error", "variance"], lineterminator="\n")
        w.writeheader()
        for row in fc.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    finally:
        if args.out:
            out.close()
    return 0


def cmd_backtest(args):
    series = read_monthly(_existing(args.input))
    if args.end:
        series = series.slice(0, series.index_of(args.end) + 1)
    cfg = ExperimentConfig(tuple(args.arima), tuple(args.garch), args.dist, args.log, args.alpha, args.robust,
                           args.name or f"split-{args.split[0]}-{args.split[1]:02d}")
    report = run_experiment(series, args.split, cfg)
    doc = report.to_dict()
    doc["meta"] = utc_meta(command="backtest", seed=args.seed)
    _write_json(doc, args.out)
    if args.out:
        with open(Path(args.out).with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "actual", "forecast", "lower", "upper"])
            for row in doc["series"]:
                w.writerow([row["month"]] + [repr(row[k]) for k in ("actual", "forecast", "lower", "upper")])
        m = report.metrics
        print(f"train {report.n_train} / test {report.actuals.size} months, split {doc['train_end']}")
        print(f"MAPE {m.mape:.3f}%  MAE {m.mae:.2f}  DA {m.directional_accuracy:.3f}  CI coverage {m.ci_coverage:.3f}")
        print(f"{'parameter':<20}{'estimate':>16}{'std err':>14}{'t-stat':>12}")
        for p in doc["parameters"]:
            if p["t_statistic"] is None:
                print(f"{p['name']:<20}{p['estimate']:>16.6g}{'n/a':>14}{'n/a':>12}")
            else:
                star = " *" if p["significant"] else ""
                print(f"{p['name']:<20}{p['estimate']:>16.6g}{p['stderr']:>14.6g}{p['t_statistic']:>12.4f}{star}")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="voltcast", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"voltcast {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_opts(p):
        p.add_argument("--arima", type=_order(3), default=(1, 1, 1), help="p,d,q (default 1,1,1)")
        p.add_argument("--garch", type=_order(2), default=(1, 1), help="ARCH,GARCH orders (default 1,1)")
        p.add_argument("--dist", choices=("normal", "student_t", "gamma"), default="normal")
        p.add_argument("--log", action="store_true", help="fit on log load")
        p.add_argument("--robust", action="store_true", help="sandwich standard errors")
        p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("ingest", help="hourly CSV -> monthly series")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=AGGREGATION_MODES, default="peak")
    p.add_argument("--ts-col", default="timestamp")
    p.add_argument("--load-col", default="load_mw")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--ts-format", default=None, help="strptime format when timestamps are not ISO-8601")
    p.add_argument("--timezone", default="UTC", help="label recorded for the naive timestamps")
    p.add_argument("--duplicates", choices=("keep-first", "average"), default="keep-first")
    p.add_argument("--max-gap", type=int, default=6, help="longest gap (hours) filled by interpolation")
    p.add_argument("--allow-long-gaps", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("diagnose", help="summary statistics, correlograms, ADF and JB")
    p.add_argument("--input", required=True)
    p.add_argument("--max-lag", type=int, default=24)
    p.add_argument("--adf-regression", choices=("constant", "constant+trend"), default="constant")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("fit", help="fit the ARIMA-GARCH model")
    p.add_argument("--input", required=True)
    p.add_argument("--train-end", type=_year_month)
    p.add_argument("--out")
    model_opts(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="banded forecasts from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("backtest", help="fit on the training span, forecast and score the test span")
    p.add_argument("--input", required=True)
    p.add_argument("--split", type=_year_month, required=True, help="last training month, YYYY-MM")
    p.add_argument("--end", type=_year_month, help="drop data after this month")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--name")
    p.add_argument("--out")
    model_opts(p)
    p.set_defaults(func=cmd_backtest)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("VOLTCAST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "horizon", 1) < 1:
        print("voltcast: error: --horizon must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"voltcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EstimationError as exc:
        print(f"voltcast: estimation failed: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, DataError) else EXIT_CONVERGENCE
    except ConvergenceError as exc:
        print(f"voltcast: estimation failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (DataError, ValueError, OSError) as exc:
        print(f"voltcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
