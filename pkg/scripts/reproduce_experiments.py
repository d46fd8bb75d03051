"""Run the two backtests end to end: the 2016 out-of-sample year and the 2008 recession.

    python3 scripts/reproduce_experiments.py --hourly pjm_hourly.csv --out-dir runs/
    python3 scripts/reproduce_experiments.py --synthetic --out-dir runs/

Writes the monthly series, a summary-statistics JSON and one report JSON/CSV
pair per experiment into ``--out-dir``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
from dataclasses import asdict
from pathlib import Path

from voltcast.ingest import CleaningPolicy, aggregate_monthly, clean_series, parse_hourly_csv, write_monthly
from voltcast.memforecast import ExperimentConfig, run_experiment
from voltcast.series import describe, difference, log_transform
from voltcast.stattests import adf_test, jarque_bera
from voltcast.synthetic import synthetic_hourly


def load_monthly(args):
    if args.synthetic:
        hourly = synthetic_hourly(1993, 24, seed=args.seed)
        report = None
    else:
        hourly = parse_hourly_csv(args.hourly, args.ts_col, args.load_col)
        hourly, report = clean_series(hourly, CleaningPolicy(args.duplicates))
    monthly = aggregate_monthly(hourly, args.mode)
    return monthly.slice(monthly.index_of((1993, 1)), monthly.index_of((2016, 12)) + 1), report


def summary(monthly):
    out = {}
    for name, s in (("load", monthly), ("diff", difference(monthly, 1)), ("log", log_transform(monthly))):
        out[name] = describe(s).to_dict()
    out["adf_load"] = adf_test(monthly, alpha=0.01).to_dict()
    out["adf_diff"] = adf_test(difference(monthly, 1), alpha=0.01).to_dict()
    out["jarque_bera_load"] = jarque_bera(monthly).to_dict()
    return out


def write_report(rep, out_dir: Path):
    doc = rep.to_dict()
    stem = out_dir / rep.config.name
    stem.with_suffix(".json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(stem.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, ["month", "actual", "forecast", "lower", "upper"], lineterminator="\n")
        w.writeheader()
        w.writerows(doc["series"])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--hourly", type=Path)
    src.add_argument("--synthetic", action="store_true")
    ap.add_argument("--ts-col", default="timestamp")
    ap.add_argument("--load-col", default="load_mw")
    ap.add_argument("--duplicates", choices=("keep-first", "average"), default="keep-first")
    ap.add_argument("--mode", default="peak")
    ap.add_argument("--arima", default="1,1,1")
    ap.add_argument("--garch", default="1,1")
    ap.add_argument("--dist", default="normal")
    ap.add_argument("--log", action="store_true", help="fit on log load")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out-dir", type=Path, default=Path("runs"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    monthly, cleaning = load_monthly(args)
    write_monthly(monthly, args.out_dir / "monthly.csv", cleaning)
    (args.out_dir / "summary.json").write_text(json.dumps(summary(monthly), indent=2) + "\n")

    arima = tuple(int(v) for v in args.arima.split(","))
    garch = tuple(int(v) for v in args.garch.split(","))
    runs = [
        ("oos-2016", monthly, (2015, 12)),
        ("recession-2008", monthly.slice(0, monthly.index_of((2008, 12)) + 1), (2007, 12)),
    ]
    for name, series, split in runs:
        cfg = ExperimentConfig(arima, garch, args.dist, args.log, name=name)
        rep = run_experiment(series, split, cfg)
        write_report(rep, args.out_dir)
        m = asdict(rep.metrics)
        print(f"{name:<16} train={rep.n_train:<4} test={rep.actuals.size:<3} "
              f"MAPE={m['mape']:.2f}%  MAE={m['mae']:.1f}  DA={m['directional_accuracy']:.3f}  "
              f"coverage={m['ci_coverage']:.3f}")
        for p in rep.parameters:
            t = p.t_statistic if hasattr(p, "t_statistic") else float("nan")
            print(f"    {p.name:<18} {p.estimate:>14.6g}  t={t:8.3f}")


if __name__ == "__main__":
    main()
