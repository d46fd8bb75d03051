"""ARIMA(p, d, q) mean equation: conditional-sum-of-squares fit, order search, forecasts."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import _numerics as num
from .dist import standardized_draws
from .errors import ConvergenceError, DataError
from .series import MonthlySeries, Transform, as_array, durbin_levinson, _autocorr, undo_lineage

logger = logging.getLogger(__name__)

_LOG2PI = math.log(2 * math.pi)
# tanh(8) = 0.99999977: keeps partial autocorrelations off the unit circle
_PACF_BOX = 8.0


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError(f"ARIMA orders must be >= 0, got {self}")

    @classmethod
    def parse(cls, text: str) -> "ArimaOrder":
        p, d, q = (int(v) for v in text.split(","))
        return cls(p, d, q)

    def __str__(self):
        return f"({self.p},{self.d},{self.q})"


def information_criteria(loglik: float, k: int, n: int) -> tuple[float, float]:
    """(AIC, BIC) for a model with ``k`` estimated parameters on ``n`` observations."""
    if k < 1 or n <= k:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    return 2 * k - 2 * loglik, k * math.log(n) - 2 * loglik


def arma_residuals(w, mu, ar, ma):
    """Innovations of an ARMA model with pre-sample deviations and innovations set to zero."""
    return lfilter(np.r_[1.0, -np.asarray(ar)], np.r_[1.0, np.asarray(ma)], np.asarray(w) - mu)


def one_step_predictions(w, mu, ar, ma, e):
    """mu + sum_i ar_i (w_{t-i} - mu) + sum_j ma_j e_{t-j}, term order shared with forecast_mean."""
    n = len(w)
    dev = np.asarray(w) - mu
    pred = np.full(n, mu, dtype=float)
    for i, a in enumerate(ar, start=1):
        pred = pred + a * np.r_[np.zeros(min(i, n)), dev[: max(n - i, 0)]]
    for j, b in enumerate(ma, start=1):
        pred = pred + b * np.r_[np.zeros(min(j, n)), e[: max(n - j, 0)]]
    return pred


def _difference(y, d):
    for _ in range(d):
        y = np.diff(y)
    return y


@dataclass(eq=False)
class ArimaModel:
    order: ArimaOrder
    intercept: float
    ar: np.ndarray
    ma: np.ndarray
    sigma2: float
    residuals: np.ndarray
    fitted: np.ndarray
    loglik: float
    stderr: dict
    history: np.ndarray
    include_mean: bool = True
    lineage: tuple = ()
    start: tuple | None = None
    aggregation_mode: str = "peak"
    fit_info: dict = field(default_factory=dict)

    @property
    def param_names(self) -> list[str]:
        names = ["intercept"] if self.include_mean else []
        names += [f"ar.L{i}" for i in range(1, self.order.p + 1)]
        names += [f"ma.L{j}" for j in range(1, self.order.q + 1)]
        return names + ["sigma2"]

    @property
    def params(self) -> dict:
        vals = ([self.intercept] if self.include_mean else []) + list(self.ar) + list(self.ma) + [self.sigma2]
        return dict(zip(self.param_names, (float(v) for v in vals)))

    @property
    def nobs(self) -> int:
        return len(self.residuals)

    @property
    def k(self) -> int:
        return len(self.param_names)

    @property
    def aic(self) -> float:
        return information_criteria(self.loglik, self.k, self.nobs)[0]

    @property
    def bic(self) -> float:
        return information_criteria(self.loglik, self.k, self.nobs)[1]

    def to_dict(self):
        return {
            "order": [self.order.p, self.order.d, self.order.q],
            "include_mean": self.include_mean,
            "params": self.params,
            "stderr": self.stderr,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "nobs": self.nobs,
            "fit_info": self.fit_info,
        }

    @classmethod
    def from_dict(cls, d, series: MonthlySeries):
        order = ArimaOrder(*d["order"])
        p = d["params"]
        return from_params(
            series,
            order,
            intercept=p.get("intercept", 0.0),
            ar=[p[f"ar.L{i}"] for i in range(1, order.p + 1)],
            ma=[p[f"ma.L{j}"] for j in range(1, order.q + 1)],
            sigma2=p["sigma2"],
            include_mean=d["include_mean"],
            stderr=d.get("stderr"),
            fit_info=d.get("fit_info"),
        )


def _series_parts(series):
    if isinstance(series, MonthlySeries):
        return series.values, series.lineage, series.start, series.aggregation_mode
    return as_array(series), (), None, "peak"


def from_params(series, order: ArimaOrder, intercept=0.0, ar=(), ma=(), sigma2=1.0,
                include_mean=True, stderr=None, fit_info=None) -> ArimaModel:
    """Build a model with given parameters: residuals, fitted values and loglik are computed from ``series``."""
    y, lineage, start, mode = _series_parts(series)
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    if ar.size != order.p or ma.size != order.q:
        raise ValueError("coefficient counts do not match the order")
    w = _difference(y, order.d)
    mu = float(intercept) if include_mean else 0.0
    e = arma_residuals(w, mu, ar, ma)
    n = e.size
    loglik = float(-0.5 * n * (_LOG2PI + math.log(sigma2)) - 0.5 * (e @ e) / sigma2)
    return ArimaModel(
        order, mu, ar, ma, float(sigma2), e, one_step_predictions(w, mu, ar, ma, e), loglik,
        dict(stderr or {}), np.array(y, dtype=float), include_mean, tuple(lineage), start, mode,
        dict(fit_info or {}),
    )


def _unpack(x, p, q, include_mean):
    mu = x[0] if include_mean else 0.0
    off = int(include_mean)
    ar = num.pacf_to_ar(np.tanh(x[off : off + p]))
    ma = -num.pacf_to_ar(np.tanh(x[off + p : off + p + q]))
    return mu, ar, ma


def fit_arima(series, order: ArimaOrder | tuple, include_mean: bool = True, robust: bool = False,
              xatol: float = 1e-8) -> ArimaModel:
    """Gaussian conditional-sum-of-squares estimate of an ARIMA model.

    The differenced series is rescaled to unit variance before the search, so
    AR/MA estimates do not depend on the units of ``series``. AR and MA
    polynomials are searched through their partial autocorrelations, which
    keeps every candidate stationary and invertible.
    """
    if not isinstance(order, ArimaOrder):
        order = ArimaOrder(*order)
    p, d, q = order.p, order.d, order.q
    y, lineage, start, mode = _series_parts(series)
    if y.size < 10 * (p + q + 1) + d:
        raise DataError(f"series of length {y.size} too short for ARIMA{order}")
    w = _difference(y, d)
    n = w.size
    scale = float(np.std(w))
    if scale == 0:
        raise DataError(f"series is constant after {d} difference(s); the likelihood is degenerate")
    ws = w / scale
    n_free = int(include_mean) + p + q

    def negll(x):
        mu, ar, ma = _unpack(x, p, q, include_mean)
        e = arma_residuals(ws, mu, ar, ma)
        css = e @ e
        if not np.isfinite(css) or css <= 0:
            return 1e100
        pen = num.box_penalty(x[int(include_mean):] * (30.0 / _PACF_BOX)) if p + q else 0.0
        return 0.5 * n * math.log(css / n) + pen

    if n_free == 0:
        x_hat = np.zeros(0)
        info = {"converged": True, "nfev": 0}
    else:
        mu0 = [float(ws.mean())] if include_mean else []
        if p:
            pac = durbin_levinson(_autocorr(ws, p))
            ar0 = list(np.arctanh(np.clip(pac, -0.9, 0.9)))
        else:
            ar0 = []
        starts = [np.array(mu0 + ar0 + [r] * q) for r in ([0.0, 0.3, -0.3] if q else [0.0])]
        x0 = min(starts, key=negll)
        res = num.simplex_minimize(negll, x0, xatol=xatol)
        x_hat = res.x
        info = {"converged": True, "nfev": int(res.nfev_total), "start_objective": float(res.start_fun)}

    mu_s, ar, ma = _unpack(x_hat, p, q, include_mean)
    e_s = arma_residuals(ws, mu_s, ar, ma)
    sig2_s = float(e_s @ e_s / n)

    # observed information in natural (scaled) parameters
    def split(theta):
        mu = theta[0] if include_mean else 0.0
        off = int(include_mean)
        return mu, theta[off : off + p], theta[off + p : off + p + q], theta[-1]

    def per_obs(theta):
        mu, a, b, s2 = split(theta)
        if s2 <= 0:
            return np.full(n, -1e100)
        e = arma_residuals(ws, mu, a, b)
        return -0.5 * (_LOG2PI + np.log(s2)) - 0.5 * e**2 / s2

    theta_hat = np.r_[[mu_s] if include_mean else [], ar, ma, sig2_s]
    cov = num.covariance_from_loglik(lambda t: float(np.sum(per_obs(t))), per_obs, theta_hat, robust)
    unit = np.r_[[scale] if include_mean else [], np.ones(p + q), scale**2]
    se = num.standard_errors(cov) * unit

    model = from_params(
        series, order, mu_s * scale, ar, ma, sig2_s * scale**2, include_mean,
        fit_info=dict(info, robust_se=robust, method="css-nelder-mead"),
    )
    model.stderr = dict(zip(model.param_names, (float(s) for s in se)))
    logger.info("ARIMA%s loglik=%.4f", order, model.loglik)
    return model


@dataclass
class OrderSelection:
    order: ArimaOrder
    criterion: str
    table: list[dict]
    model: ArimaModel


def select_order(series, max_p: int = 1, max_d: int = 1, max_q: int = 1, criterion: str = "aic",
                 include_mean: bool = True) -> OrderSelection:
    """Grid search over (p, d, q); ties go to the model with fewer parameters."""
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")
    if min(max_p, max_d, max_q) < 0:
        raise ValueError("order bounds must be >= 0")
    rows, models = [], {}
    for d in range(max_d + 1):
        for p in range(max_p + 1):
            for q in range(max_q + 1):
                order = ArimaOrder(p, d, q)
                try:
                    m = fit_arima(series, order, include_mean=include_mean)
                except (ConvergenceError, DataError) as exc:
                    logger.warning("ARIMA%s skipped: %s", order, exc)
                    continue
                models[order] = m
                rows.append({"order": [p, d, q], "k": m.k, "loglik": m.loglik, "aic": m.aic, "bic": m.bic})
    if not rows:
        raise ConvergenceError("no candidate order could be fitted")
    rows.sort(key=lambda r: (r[criterion], r["k"], r["order"]))
    best = ArimaOrder(*rows[0]["order"])
    return OrderSelection(best, criterion, rows, models[best])


@dataclass
class MeanForecast:
    point: np.ndarray  # level units
    additive: np.ndarray  # before exponentiation (log units when the series was logged)
    differenced: np.ndarray  # the model's own d-times-differenced scale
    psi: np.ndarray
    log_scale: bool


def _forecast_lineage(lineage):
    kinds = [s.kind for s in lineage]
    if "log" in kinds[1:]:
        raise DataError("forecasting supports a log transform only as the first lineage step")
    log = bool(kinds) and kinds[0] == "log"
    return log, tuple(s for s in lineage if s.kind == "diff")


def psi_weights(ar, ma, d: int, horizon: int) -> np.ndarray:
    """MA(inf) coefficients of theta(B) / (phi(B) (1-B)^d), first ``horizon`` terms."""
    denom = np.r_[1.0, -np.asarray(ar, dtype=float)]
    for _ in range(d):
        denom = np.convolve(denom, [1.0, -1.0])
    impulse = np.zeros(horizon)
    impulse[0] = 1.0
    return lfilter(np.r_[1.0, np.asarray(ma, dtype=float)], denom, impulse)


def forecast_mean(model: ArimaModel, horizon: int, history=None) -> MeanForecast:
    """Multi-step conditional means, mapped back to level units."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    y = model.history if history is None else as_array(history)
    d = model.order.d
    w = _difference(y, d)
    mu, ar, ma = model.intercept, model.ar, model.ma
    e = arma_residuals(w, mu, ar, ma)
    T = w.size
    dev = np.r_[w - mu, np.zeros(horizon)]
    eps = np.r_[e, np.zeros(horizon)]
    out = np.empty(horizon)
    for k in range(horizon):
        t = T + k
        val = mu
        for i, a in enumerate(ar, start=1):
            if t - i >= 0:
                val = val + a * dev[t - i]
            else:
                val = val + a * 0.0
        for j, b in enumerate(ma, start=1):
            if t - j >= 0:
                val = val + b * eps[t - j]
            else:
                val = val + b * 0.0
        out[k] = val
        dev[t] = val - mu

    # undo the model's own differencing
    levels = [y]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    f = out
    for lvl in range(d - 1, -1, -1):
        f = levels[lvl][-1] + np.cumsum(f)

    log, diffs = _forecast_lineage(model.lineage)
    additive = undo_lineage(f, diffs, y) if diffs else f
    point = np.exp(additive) if log else additive
    total_d = d + sum(s.order for s in diffs)
    return MeanForecast(point, additive, out, psi_weights(ar, ma, total_d, horizon), log)


def simulate_arma(ar=(), ma=(), n: int = 100, seed=None, intercept: float = 0.0, sigma2: float = 1.0,
                  dist: str = "normal", shape=None, innovations=None, d: int = 0) -> np.ndarray:
    """Simulate an ARIMA(p, d, q) path; ``intercept`` is the mean of the stationary part.

    ``innovations`` (length n + burn-in) overrides the random draws, which is
    how a GARCH error process is plugged in.
    """
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    if not num.is_stationary(ar):
        raise DataError("AR coefficients are not stationary")
    if not num.is_stationary(-ma):
        raise DataError("MA coefficients are not invertible")
    if n < 1:
        raise ValueError("n must be >= 1")
    burn = 10 * (ar.size + ma.size + 1)
    if innovations is None:
        rng = np.random.default_rng(seed)
        eps = standardized_draws(rng, n + burn, dist, shape) * math.sqrt(sigma2)
    else:
        eps = np.asarray(innovations, dtype=float)
        if eps.size != n + burn:
            raise ValueError(f"need {n + burn} innovations (n plus burn-in), got {eps.size}")
    x = lfilter(np.r_[1.0, ma], np.r_[1.0, -ar], eps)[burn:] + intercept
    for _ in range(d):
        x = np.cumsum(x)
    return x


def burn_in(p: int, q: int) -> int:
    return 10 * (p + q + 1)
