"""Unit-root, portmanteau and normality tests plus a seeded Monte-Carlo size harness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .dist import chi_square_survival, normal_quantile
from .errors import DataError
from .series import _autocorr, as_array, moments

__all__ = [
    "TestResult",
    "adf_test",
    "adf_critical_values",
    "ljung_box",
    "jarque_bera",
    "chi_square_survival",
    "normal_quantile",
    "rejection_rate",
]


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: float | None
    reject: bool
    alpha: float
    detail: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        return {
            "name": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "detail": self.detail,
        }


# MacKinnon (2010) response surfaces, one regressor:
# cv(T) = b0 + b1/T + b2/T^2 + b3/T^3
_ADF_SURFACE = {
    "constant": {
        0.01: (-3.43035, -6.5393, -16.786, -79.433),
        0.05: (-2.86154, -2.8903, -4.234, -40.040),
        0.10: (-2.56677, -1.5384, -2.809, 0.0),
    },
    "constant+trend": {
        0.01: (-3.95877, -9.0531, -28.428, -134.155),
        0.05: (-3.41049, -4.3904, -9.036, -45.374),
        0.10: (-3.12705, -2.5856, -3.925, -22.380),
    },
}
_REGRESSION_ALIASES = {"c": "constant", "ct": "constant+trend"}


def adf_critical_values(nobs: int, regression: str = "constant") -> dict[float, float]:
    regression = _REGRESSION_ALIASES.get(regression, regression)
    surface = _ADF_SURFACE[regression]
    return {a: b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3 for a, b in surface.items()}


def default_adf_lag(n: int) -> int:
    return int(12 * (n / 100.0) ** 0.25)


def _adf_design(y, lags, regression, trim):
    """Regression of dy_t on [y_{t-1}, deterministic terms, dy_{t-1..t-lags}] for t >= trim."""
    dy = np.diff(y)
    rows = np.arange(trim, dy.size)
    cols = [y[rows], np.ones(rows.size)]
    if regression == "constant+trend":
        cols.append(rows + 1.0)
    for i in range(1, lags + 1):
        cols.append(dy[rows - i])
    return np.column_stack(cols), dy[rows]


def _ols(X, z):
    beta, _, rank, _ = np.linalg.lstsq(X, z, rcond=None)
    if rank < X.shape[1]:
        raise DataError("singular ADF regression (is the series constant?)")
    resid = z - X @ beta
    dof = X.shape[0] - X.shape[1]
    s2 = resid @ resid / dof
    # (X'X)^-1 = R^-1 R^-T without squaring the condition number
    r_inv = np.linalg.inv(np.linalg.qr(X, mode="r"))
    cov = s2 * (r_inv @ r_inv.T)
    return beta, cov, resid


def adf_test(series, max_lag: int | str | None = None, regression: str = "constant", alpha: float = 0.05) -> TestResult:
    """Augmented Dickey-Fuller test; the statistic is the t-ratio on y_{t-1}.

    ``max_lag=None`` uses floor(12 (n/100)^(1/4)) lags; ``"auto"`` picks the
    lag count in 0..that bound minimising AIC on a common sample.
    """
    regression = _REGRESSION_ALIASES.get(regression, regression)
    if regression not in _ADF_SURFACE:
        raise ValueError(f"unknown ADF regression {regression!r}")
    if alpha not in (0.01, 0.05, 0.10):
        raise ValueError("ADF critical values are tabulated for alpha in {0.01, 0.05, 0.10}")
    y = as_array(series)
    n = y.size
    if n:
        # the constant absorbs a level shift; centring keeps the design well conditioned
        y = y - y.mean()
    auto = max_lag == "auto"
    bound = default_adf_lag(n) if max_lag in (None, "auto") else int(max_lag)
    if bound < 0:
        raise ValueError("max_lag must be >= 0")
    if n < 20 + bound:
        raise DataError(f"ADF needs at least {20 + bound} observations, got {n}")
    if np.ptp(y) == 0:
        raise DataError("singular ADF regression: the series is constant")

    lags = bound
    if auto:
        best = None
        for k in range(bound + 1):
            X, z = _adf_design(y, k, regression, bound)
            _, _, resid = _ols(X, z)
            nobs = z.size
            aic = nobs * math.log(resid @ resid / nobs) + 2 * X.shape[1]
            if best is None or aic < best[0]:
                best = (aic, k)
        lags = best[1]

    X, z = _adf_design(y, lags, regression, lags)
    beta, cov, _ = _ols(X, z)
    stat = float(beta[0] / math.sqrt(cov[0, 0]))
    nobs = z.size
    crit = adf_critical_values(nobs, regression)
    return TestResult(
        "adf",
        stat,
        None,
        stat < crit[alpha],
        alpha,
        {
            "lags": lags,
            "nobs": nobs,
            "regression": regression,
            "lag_selection": "aic" if auto else "fixed",
            "critical_values": {f"{int(a * 100)}%": v for a, v in crit.items()},
        },
    )


def ljung_box(residuals, lags: int = 10, fitted_params: int = 0, alpha: float = 0.05) -> TestResult:
    """Q = n(n+2) sum_k r_k^2/(n-k), chi-square with lags - fitted_params dof."""
    x = as_array(residuals)
    n = x.size
    if lags <= fitted_params:
        raise ValueError(f"lags ({lags}) must exceed fitted_params ({fitted_params})")
    if n <= lags:
        raise DataError(f"need more than {lags} observations, got {n}")
    r = _autocorr(x, lags)[1:]
    k = np.arange(1, lags + 1)
    q = float(n * (n + 2) * np.sum(r**2 / (n - k)))
    df = lags - fitted_params
    p = chi_square_survival(q, df)
    return TestResult("ljung_box", q, p, p < alpha, alpha, {"lags": lags, "df": df, "fitted_params": fitted_params})


def jarque_bera(values, alpha: float = 0.05) -> TestResult:
    """JB = n/6 (S^2 + (K-3)^2/4). ``detail['h']`` is 1 when normality is rejected."""
    x = as_array(values)
    n = x.size
    if n < 8:
        raise DataError(f"Jarque-Bera needs at least 8 observations, got {n}")
    s, k = moments(x)
    return jarque_bera_from_moments(n, s, k, alpha)


def jarque_bera_from_moments(n: int, skewness: float, kurtosis: float, alpha: float = 0.05) -> TestResult:
    jb = n / 6.0 * (skewness**2 + (kurtosis - 3.0) ** 2 / 4.0)
    p = chi_square_survival(jb, 2)
    reject = p < alpha
    return TestResult(
        "jarque_bera", float(jb), p, reject, alpha,
        {"n": n, "skewness": skewness, "kurtosis_raw": kurtosis, "h": int(reject)},
    )


# -- Monte-Carlo calibration -------------------------------------------------


def _count_rejections(args):
    test, generate, seeds = args
    hits = 0
    for ss in seeds:
        rng = np.random.default_rng(ss)
        hits += bool(test(generate(rng)).reject)
    return hits


def rejection_rate(test, generate, reps: int, seed: int = 42, workers: int = 1) -> float:
    """Fraction of ``reps`` replications in which ``test(generate(rng))`` rejects.

    Each replication gets its own child of ``SeedSequence(seed)``, so the
    result does not depend on ``workers``. With workers > 1, ``test`` and
    ``generate`` must be picklable (module-level callables).
    """
    children = np.random.SeedSequence(seed).spawn(reps)
    if workers <= 1:
        return _count_rejections((test, generate, children)) / reps
    chunks = [children[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        hits = sum(pool.map(_count_rejections, [(test, generate, c) for c in chunks]))
    return hits / reps
