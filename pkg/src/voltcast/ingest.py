"""Hourly load parsing, cleaning and monthly aggregation."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError
from .series import AGGREGATION_MODES, MonthlySeries, Transform, month_offset

logger = logging.getLogger(__name__)

HOUR = np.timedelta64(1, "h")


@dataclass(frozen=True)
class HourlyRecord:
    timestamp: datetime
    load: float


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Hourly load in ascending time order.

    Timestamps are timezone-naive ``datetime64[s]``; ``timezone`` labels them.
    Right after parsing, repeated timestamps may still be present; they are
    resolved by :func:`clean_series`.
    """

    timestamps: np.ndarray
    loads: np.ndarray
    timezone: str = "UTC"
    rows_read: int = 0
    rejected: tuple[RowError, ...] = ()

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]").copy()
        ld = np.asarray(self.loads, dtype=float).copy()
        if ts.shape != ld.shape or ts.ndim != 1:
            raise DataError("timestamps and loads must be 1-D arrays of equal length")
        if ts.size and np.any(np.diff(ts) < np.timedelta64(0, "s")):
            raise DataError("hourly timestamps must be in ascending order")
        ts.setflags(write=False)
        ld.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "loads", ld)

    def __len__(self):
        return self.loads.size

    @property
    def records(self) -> list[HourlyRecord]:
        return [HourlyRecord(t.astype(datetime), float(v)) for t, v in zip(self.timestamps, self.loads)]

    @property
    def has_duplicates(self) -> bool:
        return bool(np.any(np.diff(self.timestamps) == np.timedelta64(0, "s")))


# -- parsing ---------------------------------------------------------------


def parse_timestamp(text: str, fmt: str | None = None) -> datetime:
    text = text.strip()
    if fmt:
        ts = datetime.strptime(text, fmt)
    else:
        if text.endswith("Z"):
            text = text[:-1]
        ts = datetime.fromisoformat(text)
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError(f"timestamp {text!r} is not on the hour")
    # wall-clock time is kept; the series carries the timezone label
    return ts.replace(tzinfo=None)


def parse_hourly_csv(
    source,
    ts_col: str = "timestamp",
    load_col: str = "load_mw",
    delimiter: str = ",",
    ts_format: str | None = None,
    timezone: str = "UTC",
    sort: bool = True,
) -> HourlySeries:
    """Parse delimited hourly load text.

    ``source`` is a path, a text stream or a byte stream. Malformed rows are
    skipped and reported with their line number in ``HourlySeries.rejected``.
    With ``sort=False`` out-of-order input is a fatal error instead of being
    reordered.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8-sig") as fh:
            return parse_hourly_csv(fh, ts_col, load_col, delimiter, ts_format, timezone, sort)
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source, io.BufferedIOBase) or hasattr(source, "mode") and "b" in getattr(source, "mode", ""):
        source = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")

    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty input: no header row") from None
    try:
        ti, li = header.index(ts_col), header.index(load_col)
    except ValueError:
        raise DataError(f"header {header} lacks column {ts_col!r} or {load_col!r}") from None

    stamps, loads, rejected = [], [], []
    rows = 0
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        rows += 1
        line = reader.line_num
        try:
            ts = parse_timestamp(row[ti], ts_format)
            value = float(row[li])
        except (ValueError, IndexError) as exc:
            rejected.append(RowError(line, str(exc)))
            continue
        if not np.isfinite(value) or value <= 0:
            rejected.append(RowError(line, f"load must be finite and positive, got {row[li]!r}"))
            continue
        stamps.append(ts)
        loads.append(value)

    if not stamps:
        raise DataError(f"no valid rows ({rows} read, {len(rejected)} rejected)")
    ts_arr = np.array(stamps, dtype="datetime64[s]")
    ld_arr = np.array(loads, dtype=float)
    if np.any(np.diff(ts_arr) < np.timedelta64(0, "s")):
        if not sort:
            raise DataError("timestamps are not monotone")
        order = np.argsort(ts_arr, kind="stable")
        ts_arr, ld_arr = ts_arr[order], ld_arr[order]
    logger.info("parsed %d rows, rejected %d", rows, len(rejected))
    return HourlySeries(ts_arr, ld_arr, timezone, rows, tuple(rejected))


def serialize_hourly_csv(series: HourlySeries, target, ts_col="timestamp", load_col="load_mw", delimiter=","):
    """Write the inverse format of :func:`parse_hourly_csv` (repr floats, so parsing back is bit-exact)."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            return serialize_hourly_csv(series, fh, ts_col, load_col, delimiter)
    w = csv.writer(target, delimiter=delimiter, lineterminator="\n")
    w.writerow([ts_col, load_col])
    for t, v in zip(series.timestamps.astype(datetime), series.loads):
        w.writerow([t.strftime("%Y-%m-%d %H:00"), repr(float(v))])


# -- cleaning --------------------------------------------------------------


@dataclass(frozen=True)
class CleaningPolicy:
    duplicates: str = "keep-first"  # or "average"
    max_gap: int = 6  # hours; longer gaps are left open
    allow_long_gaps: bool = False

    def __post_init__(self):
        if self.duplicates not in ("keep-first", "average"):
            raise ValueError(f"unknown duplicate policy {self.duplicates!r}")
        if self.max_gap < 0:
            raise ValueError("max_gap must be >= 0")


@dataclass
class CleaningReport:
    duplicates_resolved: list[dict] = field(default_factory=list)
    interpolated: list[str] = field(default_factory=list)
    open_gaps: list[dict] = field(default_factory=list)

    @property
    def mutations(self) -> int:
        return len(self.duplicates_resolved) + len(self.interpolated)

    @property
    def is_empty(self) -> bool:
        return self.mutations == 0 and not self.open_gaps

    def to_dict(self):
        return asdict(self)


# a month is at most 31 days; a gap longer than that wipes out a whole month
_LONG_GAP_HOURS = 31 * 24


def clean_series(series: HourlySeries, policy: CleaningPolicy | None = None) -> tuple[HourlySeries, CleaningReport]:
    """Resolve duplicate hours and interpolate short gaps."""
    policy = policy or CleaningPolicy()
    report = CleaningReport()
    ts, ld = series.timestamps, series.loads

    uniq, first, counts = np.unique(ts, return_index=True, return_counts=True)
    if uniq.size != ts.size:
        if policy.duplicates == "average":
            sums = np.add.reduceat(ld, first)
            vals = sums / counts
        else:
            vals = ld[first]
        for i in np.flatnonzero(counts > 1):
            report.duplicates_resolved.append(
                {"timestamp": str(uniq[i]), "copies": int(counts[i]), "value": float(vals[i])}
            )
        ts, ld = uniq, vals

    steps = (np.diff(ts) // HOUR).astype(np.int64) if ts.size > 1 else np.zeros(0, np.int64)
    if np.any(np.diff(ts) % HOUR != np.timedelta64(0, "s")):
        raise DataError("timestamps are not aligned to whole hours")
    new_ts, new_ld = [ts[:1]], [ld[:1]]
    for i in np.flatnonzero(steps > 1):
        missing = int(steps[i]) - 1
        t0, t1 = ts[i], ts[i + 1]
        if missing > _LONG_GAP_HOURS and not policy.allow_long_gaps:
            raise DataError(f"gap of {missing} hours after {t0} exceeds one month")
        if missing <= policy.max_gap:
            frac = np.arange(1, missing + 1) / (missing + 1)
            fill_ts = t0 + np.arange(1, missing + 1) * HOUR
            fill = ld[i] + frac * (ld[i + 1] - ld[i])
            report.interpolated.extend(str(t) for t in fill_ts)
            new_ts.append(fill_ts)
            new_ld.append(fill)
        else:
            report.open_gaps.append({"after": str(t0), "missing_hours": missing})
    if report.interpolated:
        ts = np.concatenate([ts] + new_ts[1:])
        ld = np.concatenate([ld] + new_ld[1:])
        order = np.argsort(ts, kind="stable")
        ts, ld = ts[order], ld[order]

    cleaned = HourlySeries(ts, ld, series.timezone, series.rows_read, series.rejected)
    return cleaned, report


# -- aggregation -----------------------------------------------------------


_REDUCERS = {
    "peak": np.maximum.reduceat,
    "minimum": np.minimum.reduceat,
    "sum": np.add.reduceat,
}


def aggregate_monthly(series: HourlySeries, mode: str = "peak") -> MonthlySeries:
    """One value per calendar month: peak, minimum, sum or mean of the hourly loads."""
    if mode not in AGGREGATION_MODES:
        raise DataError(f"unknown aggregation mode {mode!r}")
    if len(series) == 0:
        raise DataError("cannot aggregate an empty series")
    if series.has_duplicates:
        raise DataError("series has duplicate hours; run clean_series first")
    month_idx = series.timestamps.astype("datetime64[M]").astype(np.int64)
    present, first = np.unique(month_idx, return_index=True)
    expected = np.arange(present[0], present[-1] + 1)
    if present.size != expected.size:
        gap = int(np.setdiff1d(expected, present)[0])
        y, m = gap // 12 + 1970, gap % 12 + 1
        raise DataError(f"month {y}-{m:02d} has no hourly records")
    if mode == "mean":
        counts = np.diff(np.r_[first, len(series)])
        values = np.add.reduceat(series.loads, first) / counts
    else:
        values = _REDUCERS[mode](series.loads, first)
    start = (int(present[0]) // 12 + 1970, int(present[0]) % 12 + 1)
    return MonthlySeries(start, values, mode)


# -- monthly file format ---------------------------------------------------


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_monthly(series: MonthlySeries, path, report: CleaningReport | None = None, extra=None):
    """Write ``year,month,value`` rows plus a JSON sidecar with mode, lineage and cleaning report."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "month", "value"])
        for (y, m), v in zip(series.months(), series.values):
            w.writerow([y, m, repr(float(v))])
    meta = {
        "aggregation_mode": series.aggregation_mode,
        "lineage": [t.to_dict() for t in series.lineage],
        "cleaning_report": report.to_dict() if report else None,
    }
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_monthly(path) -> MonthlySeries:
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no monthly rows")
    try:
        months = [(int(r["year"]), int(r["month"])) for r in rows]
        values = [float(r["value"]) for r in rows]
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed monthly file ({exc})") from None
    for k, ym in enumerate(months):
        if ym != month_offset(months[0], k):
            raise DataError(f"{path}: month {ym[0]}-{ym[1]:02d} breaks the monthly sequence")
    mode, lineage = "peak", ()
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        mode = meta.get("aggregation_mode", mode)
        lineage = tuple(Transform.from_dict(t) for t in meta.get("lineage", []))
    return MonthlySeries(months[0], values, mode, lineage)
