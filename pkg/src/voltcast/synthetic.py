"""Synthetic hourly load with trend, seasonality and a recession dip.

Used by the tests and the demo scripts when no utility archive is at hand.
Magnitudes are tuned so monthly peaks land in the 1.2e5 - 2.2e5 MW range.
"""
from __future__ import annotations

import numpy as np

from .garch import GarchParams, simulate_garch
from .ingest import HourlySeries


def synthetic_hourly(start_year: int = 1993, years: int = 24, seed: int = 42, base: float = 95000.0) -> HourlySeries:
    rng = np.random.default_rng(seed)
    t0 = np.datetime64(f"{start_year}-01-01T00:00", "h")
    t1 = np.datetime64(f"{start_year + years}-01-01T00:00", "h")
    ts = np.arange(t0, t1, dtype="datetime64[h]")
    n = ts.size

    frac_year = (ts - t0).astype(float) / (24 * 365.25)
    month_idx = ts.astype("datetime64[M]").astype(int)
    month_of_year = month_idx % 12
    hour = (ts - ts.astype("datetime64[D]")).astype(int)
    weekday = (ts.astype("datetime64[D]").astype(int) + 3) % 7  # 1970-01-01 was a Thursday

    # steady growth, a flat spell and a dip around the 2008-2009 recession
    year_abs = start_year + frac_year
    growth = 1.0 + 0.012 * frac_year
    growth -= 0.05 * np.exp(-0.5 * ((year_abs - 2009.2) / 0.6) ** 2)
    season = 1.0 + 0.30 * np.exp(-0.5 * ((month_of_year - 6.5) / 1.2) ** 2) + 0.10 * np.exp(
        -0.5 * (np.minimum(month_of_year, 12 - month_of_year) / 1.0) ** 2
    )
    daily = 1.0 + 0.16 * np.sin((hour - 11) / 24 * 2 * np.pi)
    weekly = np.where(weekday >= 5, 0.92, 1.0)

    # monthly level shocks with volatility clustering, interpolated to hours
    months = month_idx - month_idx[0]
    shock, _ = simulate_garch(GarchParams(0.00025, [0.3], [0.5]), int(months[-1]) + 1, seed=rng.integers(2**32))
    monthly = 1.0 + shock[months]

    noise = np.empty(n)
    eps = rng.normal(0, 0.01, n)
    noise[0] = eps[0]
    # hourly AR(1) weather noise
    for i in range(1, n):
        noise[i] = 0.97 * noise[i - 1] + eps[i]

    load = base * growth * season * daily * weekly * monthly * (1.0 + noise)
    return HourlySeries(ts.astype("datetime64[s]"), np.round(load, 1), "EPT", n)
