"""Monthly series container, transforms and descriptive statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dist import normal_quantile
from .errors import DataError

AGGREGATION_MODES = ("peak", "minimum", "sum", "mean")


def month_offset(start: tuple[int, int], k: int) -> tuple[int, int]:
    """Calendar month ``k`` months after ``start``."""
    idx = start[0] * 12 + (start[1] - 1) + k
    return idx // 12, idx % 12 + 1


def months_between(a: tuple[int, int], b: tuple[int, int]) -> int:
    return (b[0] * 12 + b[1]) - (a[0] * 12 + a[1])


@dataclass(frozen=True)
class Transform:
    """One step of a series' transform lineage.

    ``kind`` is ``"log"`` or ``"diff"``; a diff step keeps the first value of
    every intermediate difference so that :func:`integrate` can undo it.
    """

    kind: str
    order: int = 0
    initial: tuple[float, ...] = ()

    def to_dict(self):
        if self.kind == "log":
            return {"kind": "log"}
        return {"kind": "diff", "order": self.order, "initial": list(self.initial)}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "log":
            return cls("log")
        return cls("diff", int(d["order"]), tuple(float(v) for v in d["initial"]))


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    """Equally spaced monthly values with their aggregation mode and transform lineage."""

    start: tuple[int, int]
    values: np.ndarray
    aggregation_mode: str = "peak"
    lineage: tuple[Transform, ...] = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise DataError("a monthly series needs at least one value")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise DataError(f"non-finite value at index {bad}")
        year, month = self.start
        if not 1 <= month <= 12:
            raise DataError(f"invalid start month {month}")
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise DataError(f"unknown aggregation mode {self.aggregation_mode!r}")
        if not self.lineage and np.any(vals <= 0):
            bad = int(np.flatnonzero(vals <= 0)[0])
            raise DataError(f"raw load must be positive; index {bad} is {vals[bad]}")
        vals.setflags(write=False)
        object.__setattr__(self, "start", (int(year), int(month)))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lineage", tuple(self.lineage))

    def __len__(self):
        return self.values.size

    @property
    def transform(self) -> str:
        if not self.lineage:
            return "raw"
        last = self.lineage[-1]
        return "log" if last.kind == "log" else f"diff({last.order})"

    @property
    def end(self) -> tuple[int, int]:
        return month_offset(self.start, len(self) - 1)

    def months(self) -> list[tuple[int, int]]:
        return [month_offset(self.start, k) for k in range(len(self))]

    def index_of(self, ym: tuple[int, int]) -> int:
        return months_between(self.start, ym)

    def slice(self, i: int, j: int) -> "MonthlySeries":
        """Sub-series of positions [i, j). Lineage is kept; diff initial values still refer to the parent."""
        return replace(self, start=month_offset(self.start, i), values=self.values[i:j])

    def with_values(self, values, start=None) -> "MonthlySeries":
        return replace(self, values=values, start=start or self.start)


def as_array(series) -> np.ndarray:
    if isinstance(series, MonthlySeries):
        return series.values
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise DataError("expected a one-dimensional series")
    return arr


# -- transforms -------------------------------------------------------------


def difference(series: MonthlySeries, d: int = 1) -> MonthlySeries:
    """d-th order difference; the lineage stores what :func:`integrate` needs."""
    if d < 1:
        raise DataError(f"difference order must be >= 1, got {d}")
    x = series.values
    if d >= len(x):
        raise DataError(f"cannot difference {len(x)} values {d} times")
    initial = []
    for _ in range(d):
        initial.append(float(x[0]))
        x = x[1:] - x[:-1]
    step = Transform("diff", d, tuple(initial))
    return MonthlySeries(
        month_offset(series.start, d), x, series.aggregation_mode, series.lineage + (step,)
    )


def integrate(diffed, initial_values) -> MonthlySeries | np.ndarray:
    """Inverse of :func:`difference`.

    ``initial_values[k]`` is the first element of the k-th intermediate
    difference (k = 0 is the level). Accepts a MonthlySeries (the lineage
    step is popped) or a bare array (an array is returned).
    """
    initial = [float(v) for v in initial_values]
    d = len(initial)
    if d < 1:
        raise DataError("integration needs at least one initial value")
    if isinstance(diffed, MonthlySeries):
        if not diffed.lineage or diffed.lineage[-1].kind != "diff":
            raise DataError("series was not produced by difference()")
        if diffed.lineage[-1].order != d:
            raise DataError(f"expected {diffed.lineage[-1].order} initial values, got {d}")
        x = diffed.values
    else:
        x = np.asarray(diffed, dtype=float)
    for k in range(d - 1, -1, -1):
        # sequential accumulation, the exact mirror of the subtraction in difference()
        x = np.cumsum(np.r_[initial[k], x])
    if isinstance(diffed, MonthlySeries):
        return MonthlySeries(
            month_offset(diffed.start, -d), x, diffed.aggregation_mode, diffed.lineage[:-1]
        )
    return x


def log_transform(series: MonthlySeries) -> MonthlySeries:
    x = series.values
    bad = np.flatnonzero(x <= 0)
    if bad.size:
        raise DataError(f"log of non-positive value at index {int(bad[0])} ({x[bad[0]]})")
    return MonthlySeries(
        series.start, np.log(x), series.aggregation_mode, series.lineage + (Transform("log"),)
    )


def exp_transform(series: MonthlySeries) -> MonthlySeries:
    if not series.lineage or series.lineage[-1].kind != "log":
        raise DataError("series was not produced by log_transform()")
    return MonthlySeries(series.start, np.exp(series.values), series.aggregation_mode, series.lineage[:-1])


def undo_lineage(values, lineage, history=None) -> np.ndarray:
    """Map values expressed in a transformed space back to level units.

    ``values`` continue ``history`` (the transformed series they extend);
    diff steps are undone by integrating history+values and keeping the tail.
    """
    values = np.asarray(values, dtype=float)
    hist = None if history is None else np.asarray(history, dtype=float)
    for step in reversed(lineage):
        if step.kind == "log":
            values = np.exp(values)
            hist = None if hist is None else np.exp(hist)
        else:
            if hist is None:
                raise DataError("undoing a difference needs the series history")
            full = integrate(np.r_[hist, values], step.initial)
            values = full[len(full) - len(values):]
            hist = full[: len(full) - len(values)]
    return values


# -- descriptive statistics ------------------------------------------------


@dataclass(frozen=True)
class SummaryStats:
    """Table-style moments. ``kurtosis`` is raw (3 for a normal sample), not excess."""

    n: int
    mean: float
    max: float
    min: float
    median: float
    std_dev: float
    skewness: float
    kurtosis: float

    def to_dict(self):
        return {
            "n": self.n,
            "mean": self.mean,
            "max": self.max,
            "min": self.min,
            "median": self.median,
            "std_dev": self.std_dev,
            "skewness": self.skewness,
            "kurtosis_raw": self.kurtosis,
        }


def moments(x) -> tuple[float, float]:
    """Population skewness and raw kurtosis (divide-by-n central moments)."""
    x = as_array(x)
    dev = x - x.mean()
    m2 = np.mean(dev**2)
    if m2 <= 0:
        raise DataError("zero variance: moments are undefined")
    skew = np.mean(dev**3) / m2**1.5
    kurt = np.mean(dev**4) / m2**2
    return float(skew), float(kurt)


def describe(series) -> SummaryStats:
    x = as_array(series)
    if x.size < 2:
        raise DataError("describe needs at least two values")
    dev = x - x.mean()
    if np.all(dev == 0):
        skew, kurt = float("nan"), float("nan")
    else:
        skew, kurt = moments(x)
    return SummaryStats(
        n=int(x.size),
        mean=float(x.mean()),
        max=float(x.max()),
        min=float(x.min()),
        median=float(np.median(x)),
        std_dev=float(x.std(ddof=1)),
        skewness=skew,
        kurtosis=kurt,
    )


@dataclass(frozen=True)
class CorrelogramPoint:
    lag: int
    value: float
    confidence_bound: float


def _autocorr(x, max_lag):
    x = as_array(x)
    n = x.size
    if not 0 <= max_lag < n:
        raise DataError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    dev = x - x.mean()
    denom = float(dev @ dev)
    if denom == 0.0:
        raise DataError("autocorrelation of a constant series is undefined")
    r = np.array([dev[: n - k] @ dev[k:] for k in range(max_lag + 1)]) / denom
    return r


def _band(n, level=0.95):
    return normal_quantile(0.5 + level / 2) / math.sqrt(n)


def acf(series, max_lag: int) -> list[CorrelogramPoint]:
    r = _autocorr(series, max_lag)
    band = _band(as_array(series).size)
    return [CorrelogramPoint(k, float(v), band) for k, v in enumerate(r)]


def durbin_levinson(r) -> np.ndarray:
    """Partial autocorrelations at lags 1..len(r)-1 from autocorrelations r[0..m]."""
    r = np.asarray(r, dtype=float)
    m = r.size - 1
    out = np.zeros(m)
    phi = np.zeros(0)
    v = r[0]
    for k in range(1, m + 1):
        a = (r[k] - phi @ r[k - 1 : 0 : -1]) / v if k > 1 else r[1] / v
        phi = np.r_[phi - a * phi[::-1], a]
        v *= 1.0 - a * a
        out[k - 1] = a
        if v <= 0:
            # perfectly predictable; higher partials are zero
            break
    return out


def pacf(series, max_lag: int) -> list[CorrelogramPoint]:
    r = _autocorr(series, max_lag)
    band = _band(as_array(series).size)
    vals = np.r_[1.0, durbin_levinson(r)]
    return [CorrelogramPoint(k, float(v), band) for k, v in enumerate(vals)]


# -- splitting -------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_end: tuple[int, int]
    train: MonthlySeries
    test: MonthlySeries = field(repr=False)


def split_train_test(series: MonthlySeries, train_end: tuple[int, int]) -> SplitSpec:
    k = series.index_of(tuple(train_end)) + 1
    if k < 1 or k >= len(series):
        raise DataError(
            f"train_end {train_end[0]}-{train_end[1]:02d} must fall strictly inside "
            f"{series.start[0]}-{series.start[1]:02d}..{series.end[0]}-{series.end[1]:02d}"
        )
    return SplitSpec(tuple(train_end), series.slice(0, k), series.slice(k, len(series)))
