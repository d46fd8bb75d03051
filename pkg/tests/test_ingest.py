import io
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, strategies as st

from voltcast.errors import DataError
from voltcast.ingest import (
    CleaningPolicy,
    HourlySeries,
    aggregate_monthly,
    clean_series,
    parse_hourly_csv,
    read_monthly,
    serialize_hourly_csv,
    write_monthly,
)


def _csv(*rows, header="timestamp,load_mw"):
    return io.StringIO("\n".join((header,) + rows) + "\n")


def _hours(start, n):
    t0 = np.datetime64(start, "h")
    return (t0 + np.arange(n)).astype("datetime64[s]")


def test_parse_two_rows():
    s = parse_hourly_csv(_csv("2016-01-01 00:00,100.5", "2016-01-01T01:00:00,101"))
    assert len(s) == 2
    assert s.rows_read == 2 and not s.rejected
    assert s.records[1].timestamp == datetime(2016, 1, 1, 1)
    assert s.loads.tolist() == [100.5, 101.0]


def test_bad_row_reported_with_line_number():
    s = parse_hourly_csv(_csv("2016-01-01 00:00,100", "2016-01-01 01:00,abc", "2016-01-01 02:00,90"))
    assert len(s) == 2
    assert [e.line for e in s.rejected] == [3]
    assert "abc" in s.rejected[0].message


def test_bad_timestamp_and_off_hour_rejected():
    s = parse_hourly_csv(_csv("2016-13-01 00:00,1", "2016-01-01 00:30,1", "2016-01-01 01:00,1"))
    assert [e.line for e in s.rejected] == [2, 3]


def test_nonpositive_load_rejected():
    s = parse_hourly_csv(_csv("2016-01-01 00:00,0", "2016-01-01 01:00,-3", "2016-01-01 02:00,5"))
    assert len(s) == 1 and len(s.rejected) == 2


def test_empty_file_is_fatal():
    with pytest.raises(DataError):
        parse_hourly_csv(io.StringIO(""))
    with pytest.raises(DataError):
        parse_hourly_csv(_csv())


def test_bytes_source_and_custom_columns():
    raw = b"when;mw\n01/01/2016 00:00;5\n01/01/2016 01:00;6\n"
    s = parse_hourly_csv(io.BytesIO(raw), ts_col="when", load_col="mw", delimiter=";", ts_format="%m/%d/%Y %H:%M")
    assert s.loads.tolist() == [5.0, 6.0]


def test_unsorted_input_sorted_or_fatal():
    src = ("2016-01-01 02:00,3", "2016-01-01 00:00,1", "2016-01-01 01:00,2")
    s = parse_hourly_csv(_csv(*src))
    assert s.loads.tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(DataError):
        parse_hourly_csv(_csv(*src), sort=False)


def test_duplicate_average():
    s = parse_hourly_csv(_csv("2016-01-01 00:00,10", "2016-01-01 01:00,20", "2016-01-01 01:00,30", "2016-01-01 02:00,5"))
    clean, rep = clean_series(s, CleaningPolicy("average"))
    assert clean.loads.tolist() == [10.0, 25.0, 5.0]
    assert len(rep.duplicates_resolved) == 1 and rep.duplicates_resolved[0]["copies"] == 2


def test_three_hour_gap_interpolated():
    ts = np.r_[_hours("2016-01-01T00", 2), _hours("2016-01-01T05", 2)]
    s = HourlySeries(ts, [10.0, 10.0, 50.0, 60.0])
    clean, rep = clean_series(s, CleaningPolicy(max_gap=6))
    assert len(clean) == 7
    assert len(rep.interpolated) == 3
    np.testing.assert_allclose(clean.loads[2:5], [20.0, 30.0, 40.0])


def test_long_gap_left_open_or_fatal():
    ts = np.r_[_hours("2016-01-01T00", 2), _hours("2016-01-01T20", 2)]
    clean, rep = clean_series(HourlySeries(ts, [1.0, 1.0, 1.0, 1.0]), CleaningPolicy(max_gap=6))
    assert len(clean) == 4 and rep.open_gaps == [{"after": "2016-01-01T01:00:00", "missing_hours": 18}]

    ts = np.r_[_hours("2016-01-01T00", 2), _hours("2016-03-01T00", 2)]
    s = HourlySeries(ts, [1.0] * 4)
    with pytest.raises(DataError):
        clean_series(s)
    clean_series(s, CleaningPolicy(allow_long_gaps=True))


def test_dst_fixture():
    # US autumn fall-back: 01:00 local repeats; spring-forward: 02:00 is missing.
    rows = [
        "2015-11-01 00:00,100", "2015-11-01 01:00,110", "2015-11-01 01:00,130", "2015-11-01 02:00,120",
        "2016-03-13 00:00,90", "2016-03-13 01:00,95", "2016-03-13 03:00,105",
    ]
    s = parse_hourly_csv(_csv(*rows), timezone="America/New_York")
    assert len(s) == 7 and s.has_duplicates
    clean, rep = clean_series(s, CleaningPolicy("keep-first", allow_long_gaps=True))
    # hand count: 7 rows - 1 duplicate + 1 interpolated hour; the months-long gap stays open
    assert len(clean) == 7
    assert len(rep.duplicates_resolved) == 1
    assert rep.interpolated == ["2016-03-13T02:00:00"]
    assert len(rep.open_gaps) == 1
    assert clean.loads[1] == 110.0
    assert clean.loads[-2] == 100.0
    assert clean.timezone == "America/New_York"


def test_clean_is_idempotent(hourly):
    once, rep1 = clean_series(hourly)
    assert rep1.is_empty
    twice, rep2 = clean_series(once)
    assert rep2.is_empty
    assert np.array_equal(once.loads, twice.loads) and np.array_equal(once.timestamps, twice.timestamps)


@given(st.lists(st.floats(1e-3, 1e7, allow_nan=False), min_size=1, max_size=60))
def test_parse_serialize_roundtrip(loads):
    s = HourlySeries(_hours("2010-06-01T00", len(loads)), loads)
    buf = io.StringIO()
    serialize_hourly_csv(s, buf)
    back = parse_hourly_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.timestamps, s.timestamps)
    assert back.loads.tobytes() == s.loads.tobytes()


def test_constant_month_peak_and_sum():
    s = HourlySeries(_hours("2016-01-01T00", 744), np.full(744, 100.0))
    assert aggregate_monthly(s, "peak").values.tolist() == [100.0]
    s1 = HourlySeries(_hours("2016-01-01T00", 744), np.ones(744))
    m = aggregate_monthly(s1, "sum")
    assert m.values.tolist() == [744.0] and m.start == (2016, 1)


def test_missing_month_fatal():
    ts = np.r_[_hours("2016-01-01T00", 24), _hours("2016-03-01T00", 24)]
    with pytest.raises(DataError, match="2016-02"):
        aggregate_monthly(HourlySeries(ts, np.ones(48)))


def test_aggregate_rejects_duplicates():
    ts = np.r_[_hours("2016-01-01T00", 2), _hours("2016-01-01T01", 1)]
    with pytest.raises(DataError):
        aggregate_monthly(HourlySeries(ts, [1.0, 2.0, 3.0]))


def test_full_span_shape(hourly, monthly):
    # 24 years of hourly data, roughly 8760 per year
    assert abs(len(hourly) / 24 - 8760) < 10
    assert len(monthly) == 288
    assert monthly.start == (1993, 1) and monthly.end == (2016, 12)


@given(st.integers(1, 2000), st.integers(0, 10**6))
def test_peak_mean_min_ordering(n, seed):
    r = np.random.default_rng(seed)
    s = HourlySeries(_hours("2015-12-20T00", n), r.uniform(1, 1000, n))
    pk, mn, lo = (aggregate_monthly(s, m).values for m in ("peak", "mean", "minimum"))
    assert np.all(pk >= mn) and np.all(mn >= lo)
    months = np.unique(s.timestamps.astype("datetime64[M]"))
    assert len(pk) == months.size


def test_monthly_file_roundtrip(tmp_path, monthly):
    p = write_monthly(monthly, tmp_path / "m.csv")
    back = read_monthly(p)
    assert back.start == monthly.start and back.aggregation_mode == "peak"
    assert back.values.tobytes() == monthly.values.tobytes()
    assert (tmp_path / "m.meta.json").exists()
