"""ARIMA mean + GARCH variance: banded forecasts, metrics and the backtest experiments."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .arima import ArimaModel, ArimaOrder, fit_arima, forecast_mean
from .dist import normal_quantile
from .errors import ConvergenceError, DataError, EstimationError
from .garch import GarchModel, fit_garch, forecast_variance
from .series import MonthlySeries, SplitSpec, Transform, log_transform, month_offset, split_train_test

logger = logging.getLogger(__name__)

MODEL_FORMAT = "voltcast.mem/1"


@dataclass(eq=False)
class MemModel:
    arima: ArimaModel
    garch: GarchModel
    fitted_on: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.garch.residuals) != len(self.arima.residuals) or not np.array_equal(
            self.garch.residuals, self.arima.residuals
        ):
            raise DataError("GARCH stage must be fitted on the ARIMA residuals")

    def to_dict(self, meta=None) -> dict:
        a = self.arima
        return {
            "format": MODEL_FORMAT,
            "meta": dict(meta or {}),
            "series": {
                "start": list(a.start) if a.start else None,
                "values": [float(v) for v in a.history],
                "aggregation_mode": a.aggregation_mode,
            },
            "transform": [t.to_dict() for t in a.lineage],
            "split": self.fitted_on,
            "arima": a.to_dict(),
            "garch": self.garch.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MemModel":
        if doc.get("format") != MODEL_FORMAT:
            raise DataError(f"unsupported model document format {doc.get('format')!r}")
        s = doc["series"]
        lineage = tuple(Transform.from_dict(t) for t in doc["transform"])
        if s["start"]:
            series = MonthlySeries(tuple(s["start"]), s["values"], s["aggregation_mode"], lineage)
        else:
            series = np.asarray(s["values"], dtype=float)
        arima = ArimaModel.from_dict(doc["arima"], series)
        garch = GarchModel.from_dict(doc["garch"], arima.residuals)
        return cls(arima, garch, doc.get("split", {}))

    def dumps(self, meta=None) -> str:
        return json.dumps(self.to_dict(meta), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MemModel":
        return cls.from_dict(json.loads(text))


def fit_mem(series, arima_order=(1, 1, 1), garch_order=(1, 1), dist: str = "normal", robust: bool = False,
            include_mean: bool = True, min_length: int = 100) -> MemModel:
    """Two-stage fit: ARIMA mean equation, then GARCH on its residuals."""
    n = len(series)
    if n < min_length:
        raise DataError(f"need at least {min_length} monthly values, got {n}")
    if not isinstance(arima_order, ArimaOrder):
        arima_order = ArimaOrder(*arima_order)
    try:
        arima = fit_arima(series, arima_order, include_mean=include_mean, robust=robust)
    except (ConvergenceError, DataError, np.linalg.LinAlgError) as exc:
        raise EstimationError("arima", exc) from exc
    try:
        garch = fit_garch(arima.residuals, *garch_order, dist=dist, robust=robust)
    except (ConvergenceError, DataError, np.linalg.LinAlgError) as exc:
        raise EstimationError("garch", exc) from exc
    info = {"n": n}
    if isinstance(series, MonthlySeries):
        info.update(start=list(series.start), end=list(series.end))
    return MemModel(arima, garch, info)


@dataclass
class ForecastResult:
    horizon: int
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    variance_path: np.ndarray  # GARCH h forecasts
    std_error: np.ndarray  # forecast-error sd, in log units when the series was logged
    alpha: float = 0.05
    months: list | None = None

    def rows(self):
        months = self.months or [None] * self.horizon
        for k in range(self.horizon):
            m = months[k]
            yield {
                "step": k + 1,
                "month": f"{m[0]}-{m[1]:02d}" if m else "",
                "point": float(self.point[k]),
                "lower": float(self.lower[k]),
                "upper": float(self.upper[k]),
                "std_error": float(self.std_error[k]),
                "variance": float(self.variance_path[k]),
            }


def forecast_variance_path(psi, h):
    """Var of the k-step error: sum_{j<k} psi_j^2 h_{k-j} (h indexed from step 1)."""
    H = len(h)
    out = np.empty(H)
    for k in range(1, H + 1):
        out[k - 1] = sum(psi[j] ** 2 * h[k - 1 - j] for j in range(k))
    return out


def forecast_mem(model: MemModel, horizon: int, alpha: float = 0.05) -> ForecastResult:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mean = forecast_mean(model.arima, horizon)
    h = forecast_variance(model.garch, horizon)
    var = forecast_variance_path(mean.psi, h)
    sd = np.sqrt(var)
    z = normal_quantile(1 - alpha / 2)
    lo, hi = mean.additive - z * sd, mean.additive + z * sd
    if mean.log_scale:
        lo, hi = np.exp(lo), np.exp(hi)
    months = None
    a = model.arima
    if a.start is not None:
        last = month_offset(a.start, len(a.history) - 1)
        months = [month_offset(last, k) for k in range(1, horizon + 1)]
    return ForecastResult(horizon, mean.point, lo, hi, h, sd, alpha, months)


# -- evaluation --------------------------------------------------------------


@dataclass
class Metrics:
    mape: float
    mae: float
    directional_accuracy: float
    ci_coverage: float | None = None


def evaluate(actuals, forecasts, prior_actual: float, lower=None, upper=None, mape: bool = True) -> Metrics:
    """MAPE (percent), MAE, directional accuracy and optional interval coverage.

    A step is a directional hit when sign(f_t - a_{t-1}) == sign(a_t - a_{t-1}),
    with a_0 = ``prior_actual``; a flat side only matches a flat side.
    """
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape or a.ndim != 1:
        raise DataError("actuals and forecasts must be 1-D and of equal length")
    if a.size < 1:
        raise DataError("nothing to evaluate")
    err = np.abs(a - f)
    if mape:
        if np.any(a <= 0):
            raise DataError("MAPE needs strictly positive actuals")
        mape_val = float(100.0 / a.size * np.sum(err / a))
    else:
        mape_val = float("nan")
    prev = np.r_[prior_actual, a[:-1]]
    hits = np.sign(f - prev) == np.sign(a - prev)
    cov = None
    if lower is not None and upper is not None:
        lo, hi = np.asarray(lower, float), np.asarray(upper, float)
        cov = float(np.mean((a >= lo) & (a <= hi)))
    return Metrics(mape_val, float(np.mean(err)), float(np.mean(hits)), cov)


@dataclass(frozen=True)
class ParamStat:
    name: str
    estimate: float
    stderr: float
    t_statistic: float

    @property
    def significant(self) -> bool:
        return abs(self.t_statistic) > 2.0


def param_stat(name: str, estimate: float, stderr: float) -> ParamStat:
    if stderr is None or not math.isfinite(stderr) or stderr <= 0:
        raise DataError(f"parameter {name!r} has no usable standard error ({stderr})")
    return ParamStat(name, float(estimate), float(stderr), float(estimate) / float(stderr))


def parameter_table(model: MemModel) -> list[ParamStat]:
    rows = []
    for prefix, values, errs in (
        ("arima", model.arima.params, model.arima.stderr),
        ("garch", model.garch.param_values, model.garch.stderr),
    ):
        for name, est in values.items():
            if name not in errs:
                raise DataError(f"{prefix}.{name} was fitted without a standard error")
            rows.append(param_stat(f"{prefix}.{name}", est, errs[name]))
    return rows


# -- experiments ---------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    arima_order: tuple[int, int, int] = (1, 1, 1)
    garch_order: tuple[int, int] = (1, 1)
    dist: str = "normal"
    log_transform: bool = False
    alpha: float = 0.05
    robust_se: bool = False
    name: str = "backtest"


@dataclass
class BacktestReport:
    config: ExperimentConfig
    train_end: tuple[int, int]
    n_train: int
    months: list
    actuals: np.ndarray
    forecasts: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    prior_actual: float
    metrics: Metrics
    parameters: list
    model: MemModel = field(repr=False)
    test_evaluations: int = 1

    def to_dict(self) -> dict:
        return {
            "experiment": self.config.name,
            "config": asdict(self.config),
            "train_end": f"{self.train_end[0]}-{self.train_end[1]:02d}",
            "n_train": self.n_train,
            "n_test": int(self.actuals.size),
            "prior_actual": self.prior_actual,
            "metrics": asdict(self.metrics),
            "parameters": [dict(asdict(p), significant=p.significant) if isinstance(p, ParamStat) else p
                           for p in self.parameters],
            "test_evaluations": self.test_evaluations,
            "series": [
                {"month": f"{y}-{m:02d}", "actual": float(a), "forecast": float(f), "lower": float(lo), "upper": float(hi)}
                for (y, m), a, f, lo, hi in zip(self.months, self.actuals, self.forecasts, self.lower, self.upper)
            ],
        }


def run_experiment(series: MonthlySeries, split: SplitSpec | tuple, config: ExperimentConfig | None = None) -> BacktestReport:
    """Fit on the training part, forecast the whole test span, evaluate once."""
    config = config or ExperimentConfig()
    if not isinstance(split, SplitSpec):
        split = split_train_test(series, tuple(split))
    train = split.train
    if series.lineage:
        raise DataError("experiments expect a raw (level) series; use config.log_transform for logs")
    fit_series = log_transform(train) if config.log_transform else train
    model = fit_mem(fit_series, config.arima_order, config.garch_order, config.dist, config.robust_se)
    model.fitted_on.update(train_end=list(split.train_end), n_train=len(train))
    fc = forecast_mem(model, len(split.test), config.alpha)
    # the held-out values are touched only here, once
    actuals = np.array(split.test.values)
    prior = float(train.values[-1])
    metrics = evaluate(actuals, fc.point, prior, fc.lower, fc.upper)
    try:
        params = parameter_table(model)
    except DataError as exc:
        logger.warning("parameter table incomplete: %s", exc)
        params = [{"name": n, "estimate": v, "stderr": None, "t_statistic": None}
                  for n, v in {**{f"arima.{k}": v for k, v in model.arima.params.items()},
                               **{f"garch.{k}": v for k, v in model.garch.param_values.items()}}.items()]
    return BacktestReport(config, split.train_end, len(train), split.test.months(), actuals, fc.point,
                          fc.lower, fc.upper, prior, metrics, params, model)


def utc_meta(**extra) -> dict:
    return {"created": datetime.now(timezone.utc).isoformat(timespec="seconds"), "version": __version__, **extra}
