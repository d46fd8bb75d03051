import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from voltcast import arima as ar_mod
from voltcast import garch as g_mod
from voltcast.arima import ArimaOrder, burn_in, simulate_arma
from voltcast.errors import ConvergenceError, DataError, EstimationError
from voltcast.garch import GarchParams, simulate_garch
from voltcast.memforecast import (
    ExperimentConfig,
    MemModel,
    evaluate,
    fit_mem,
    forecast_mem,
    forecast_variance_path,
    param_stat,
    parameter_table,
    run_experiment,
)
from voltcast.series import split_train_test


def composite(n, ar, ma, gp, seed, intercept=0.0, d=0):
    """ARIMA path whose innovations follow a GARCH process."""
    z, _ = simulate_garch(gp, n + burn_in(len(ar), len(ma)), seed=seed)
    return simulate_arma(ar=ar, ma=ma, n=n, intercept=intercept, innovations=z, d=d)


def known_model(y, order, intercept, ar, ma, gp):
    a = ar_mod.from_params(y, order, intercept, ar, ma, gp.unconditional_variance)
    return MemModel(a, g_mod.from_params(gp, a.residuals))


# -- forecast assembly ------------------------------------------------------------------


def test_constant_variance_interval():
    y = np.random.default_rng(1).normal(50, 3, 200)
    m = known_model(y, ArimaOrder(0, 0, 0), 50.0, [], [], GarchParams(9.0))
    fc = forecast_mem(m, 6)
    np.testing.assert_allclose(fc.point, 50.0)
    np.testing.assert_allclose(fc.upper - fc.point, 1.959963984540054 * 3, rtol=1e-12)
    np.testing.assert_allclose(fc.point - fc.lower, 1.959963984540054 * 3, rtol=1e-12)


def test_one_step_hand_assembly():
    y = composite(300, [0.5], [0.2], GarchParams(0.1, [0.2], [0.7]), seed=2, intercept=10.0)
    m = known_model(y, ArimaOrder(1, 0, 1), 10.0, [0.5], [0.2], GarchParams(0.1, [0.2], [0.7]))
    fc = forecast_mem(m, 1)
    h1 = m.garch.next_variance
    mu1 = 10.0 + 0.5 * (y[-1] - 10.0) + 0.2 * m.arima.residuals[-1]
    half = 1.959963984540054 * math.sqrt(1.0**2 * h1)
    assert fc.point[0] == pytest.approx(mu1, abs=1e-8)
    assert fc.upper[0] == pytest.approx(mu1 + half, abs=1e-8)
    assert fc.lower[0] == pytest.approx(mu1 - half, abs=1e-8)


def test_variance_path_formula():
    psi = np.array([1.0, 0.5, 0.25])
    h = np.array([2.0, 3.0, 4.0])
    out = forecast_variance_path(psi, h)
    assert out.tolist() == [2.0, 3.0 + 0.25 * 2.0, 4.0 + 0.25 * 3.0 + 0.0625 * 2.0]


def test_bounds_strict_and_sd_grows_with_unit_root():
    gp = GarchParams(0.1, [0.2], [0.7])
    y = composite(300, [0.4], [0.3], gp, seed=3, intercept=0.05, d=1) + 500
    m = fit_mem(y, (1, 1, 1), (1, 1))
    fc = forecast_mem(m, 24)
    assert np.all(fc.lower < fc.point) and np.all(fc.point < fc.upper)
    assert np.all(np.diff(fc.std_error) >= 0)


def test_log_scale_bounds_are_positive_and_asymmetric(monthly):
    cfg = ExperimentConfig(log_transform=True)
    rep = run_experiment(monthly, (2015, 12), cfg)
    assert np.all(rep.lower > 0)
    assert np.all(rep.upper - rep.forecasts > rep.forecasts - rep.lower)


def test_forecast_months_follow_history(monthly):
    train = split_train_test(monthly, (2015, 12)).train
    fc = forecast_mem(fit_mem(train), 12)
    assert fc.months[0] == (2016, 1) and fc.months[-1] == (2016, 12)
    assert [r["month"] for r in fc.rows()][:2] == ["2016-01", "2016-02"]
    with pytest.raises(ValueError):
        forecast_mem(fit_mem(train), 0)


# -- evaluation -----------------------------------------------------------------------------


def test_evaluate_identical():
    m = evaluate([100.0, 120.0, 90.0], [100.0, 120.0, 90.0], 95.0)
    assert (m.mape, m.mae, m.directional_accuracy) == (0.0, 0.0, 1.0)


def test_evaluate_direction_fixture():
    m = evaluate([100.0, 110.0], [98.0, 100.0], 105.0)
    assert m.directional_accuracy == 0.5
    assert m.mae == 6.0
    assert m.mape == 100.0 / 2 * (2 / 100 + 10 / 110)


def test_evaluate_flat_ties():
    assert evaluate([10.0], [10.0], 10.0).directional_accuracy == 1.0
    assert evaluate([10.0], [11.0], 10.0).directional_accuracy == 0.0


def test_evaluate_errors_and_coverage():
    with pytest.raises(DataError):
        evaluate([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(DataError):
        evaluate([0.0, 2.0], [1.0, 2.0], 1.0)
    assert math.isnan(evaluate([0.0, 2.0], [1.0, 2.0], 1.0, mape=False).mape)
    m = evaluate([1.0, 5.0], [1.0, 2.0], 1.0, lower=[0.0, 0.0], upper=[2.0, 3.0])
    assert m.ci_coverage == 0.5


@given(st.lists(st.tuples(st.floats(1, 1e6), st.floats(0, 1e6)), min_size=1, max_size=30), st.randoms())
def test_mape_mae_permutation_invariant(pairs, rnd):
    a, f = map(np.array, zip(*pairs))
    base = evaluate(a, f, 1.0)
    idx = list(range(len(pairs)))
    rnd.shuffle(idx)
    sh = evaluate(a[idx], f[idx], 1.0)
    assert sh.mape == pytest.approx(base.mape, rel=1e-12)
    assert sh.mae == pytest.approx(base.mae, rel=1e-12)


# -- parameter table ------------------------------------------------------------------------


def test_t_statistic_reference_values():
    assert round(param_stat("alpha", 0.812068, 0.019251).t_statistic, 4) == 42.1832
    assert round(param_stat("ar", -0.361694, 0.0246818).t_statistic, 4) == -14.6543


def test_zero_estimate_not_significant():
    p = param_stat("x", 0.0, 0.3)
    assert p.t_statistic == 0.0 and not p.significant
    with pytest.raises(DataError):
        param_stat("x", 1.0, 0.0)
    with pytest.raises(DataError):
        param_stat("x", 1.0, None)


def test_parameter_table_identity(monthly):
    m = fit_mem(split_train_test(monthly, (2015, 12)).train)
    rows = parameter_table(m)
    assert [r.name for r in rows][:2] == ["arima.intercept", "arima.ar.L1"]
    assert rows[-1].name == "garch.beta[1]"
    for r in rows:
        assert r.t_statistic * r.stderr == pytest.approx(r.estimate, rel=1e-9, abs=1e-300)
    m.garch.stderr.pop("omega")
    with pytest.raises(DataError):
        parameter_table(m)


# -- fitting and experiments ------------------------------------------------------------------


def test_fit_mem_stage_errors(monkeypatch):
    with pytest.raises(DataError):
        fit_mem(np.arange(1.0, 50.0))
    # a straight line is constant after differencing
    with pytest.raises(EstimationError) as info:
        fit_mem(np.arange(1.0, 201.0), (0, 1, 0))
    assert info.value.stage == "arima" and isinstance(info.value.cause, DataError)

    def boom(*a, **k):
        raise ConvergenceError("no luck", {"nfev": 0})

    monkeypatch.setattr("voltcast.memforecast.fit_garch", boom)
    with pytest.raises(EstimationError) as info:
        fit_mem(simulate_arma(ar=[0.5], n=150, seed=1))
    assert info.value.stage == "garch"


def test_model_document_roundtrip(monthly):
    m = fit_mem(split_train_test(monthly, (2015, 12)).train)
    doc = json.loads(m.dumps(meta={"note": "x"}))
    assert doc["format"] == "voltcast.mem/1" and doc["split"]["n"] == 276
    back = MemModel.loads(m.dumps())
    a, b = forecast_mem(m, 12), forecast_mem(back, 12)
    assert np.array_equal(a.point, b.point) and np.array_equal(a.upper, b.upper)
    with pytest.raises(DataError):
        MemModel.from_dict({**doc, "format": "other/9"})


def test_mem_rejects_mismatched_stages():
    y = np.random.default_rng(4).normal(0, 1, 120)
    a = ar_mod.from_params(y, ArimaOrder(0, 0, 0), 0.0, [], [], 1.0)
    g = g_mod.from_params(GarchParams(1.0), y[::-1].copy())
    with pytest.raises(DataError):
        MemModel(a, g)


def test_run_experiment_2016(monthly):
    rep = run_experiment(monthly, (2015, 12))
    assert rep.n_train == 276 and rep.actuals.size == 12
    assert rep.test_evaluations == 1
    m = evaluate(rep.actuals, rep.forecasts, rep.prior_actual, rep.lower, rep.upper)
    assert m == rep.metrics
    d = rep.to_dict()
    assert len(d["series"]) == 12 and d["series"][0]["month"] == "2016-01"
    json.dumps(d)


def test_run_experiment_recession(monthly):
    upto_2008 = monthly.slice(0, monthly.index_of((2008, 12)) + 1)
    rep = run_experiment(upto_2008, (2007, 12), ExperimentConfig(name="recession-2008"))
    assert rep.n_train == 180 and rep.months[0] == (2008, 1)
    assert 0.0 <= rep.metrics.directional_accuracy <= 1.0


def test_run_experiment_single_step(monthly):
    rep = run_experiment(monthly, (2016, 11))
    assert rep.actuals.size == 1 and rep.metrics.directional_accuracy in (0.0, 1.0)


def test_run_experiment_rejects_transformed(monthly):
    from voltcast.series import log_transform

    with pytest.raises(DataError):
        run_experiment(log_transform(monthly), (2015, 12))


@pytest.mark.slow
def test_composite_recovery():
    gp = GarchParams(0.1, [0.1], [0.8])
    y = composite(3000, [0.5], [0.3], gp, seed=5, intercept=2.0)
    m = fit_mem(y, (1, 0, 1), (1, 1))
    assert abs(m.arima.ar[0] - 0.5) < 0.06 and abs(m.arima.ma[0] - 0.3) < 0.06
    assert abs(m.garch.params.alpha[0] - 0.1) < 0.06 and abs(m.garch.params.beta[0] - 0.8) < 0.1


def test_homoskedastic_null_calibration():
    y = simulate_arma(ar=[0.6], n=1000, seed=6, intercept=5.0)
    m = fit_mem(y, (1, 0, 0), (1, 1))
    assert m.garch.params.alpha[0] < 0.06
    h = m.garch.h
    assert h.max() / h.min() < 1.5


def test_one_step_coverage_small_sample():
    gp = GarchParams(0.1, [0.1], [0.8])
    hits = 0
    reps = 300
    for seed in range(reps):
        y = composite(201, [0.5], [], gp, seed=1000 + seed, intercept=1.0)
        fc = forecast_mem(known_model(y[:-1], ArimaOrder(1, 0, 0), 1.0, [0.5], [], gp), 1)
        hits += fc.lower[0] <= y[-1] <= fc.upper[0]
    # binomial sd at 300 reps is 1.26 points; the bound below is about four sd
    assert abs(hits / reps - 0.95) < 0.05
