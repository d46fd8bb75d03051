"""Monte-Carlo calibration: test sizes and power, estimator recovery, interval coverage.

    python3 scripts/calibrate_tests.py --reps 2000 --workers 4 --seed 42
"""
from __future__ import annotations

import argparse
import json
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from voltcast.arima import ArimaOrder, burn_in, fit_arima, from_params, simulate_arma
from voltcast.garch import GarchParams, fit_garch, from_params as garch_from_params, simulate_garch
from voltcast.memforecast import MemModel, forecast_mem
from voltcast.stattests import adf_test, jarque_bera, ljung_box, rejection_rate

N = 500
GARCH_TRUE = GarchParams(0.1, [0.1], [0.8])


def random_walk(rng):
    return np.cumsum(rng.standard_normal(N))


def white_noise(rng):
    return rng.standard_normal(N)


def ar_half(rng):
    return simulate_arma(ar=[0.5], n=N, seed=rng)


def student_t5(rng):
    return rng.standard_t(5, N)


def adf5(x):
    return adf_test(x, alpha=0.05)


def lb10(x):
    return ljung_box(x, 10)


def ar1_estimate(ss, phi=0.7, n=2000):
    return float(fit_arima(simulate_arma(ar=[phi], n=n, seed=ss), (1, 0, 0)).ar[0])


def garch_estimate(ss, n=5000):
    z, _ = simulate_garch(GARCH_TRUE, n, seed=ss)
    p = fit_garch(z).params
    return [p.omega, p.alpha[0], p.beta[0]]


def coverage_hit(ss, alpha=0.05):
    z, _ = simulate_garch(GARCH_TRUE, 201 + burn_in(1, 0), seed=ss)
    y = simulate_arma(ar=[0.5], n=201, intercept=1.0, innovations=z)
    a = from_params(y[:-1], ArimaOrder(1, 0, 0), 1.0, [0.5], [], GARCH_TRUE.unconditional_variance)
    fc = forecast_mem(MemModel(a, garch_from_params(GARCH_TRUE, a.residuals)), 1, alpha)
    return bool(fc.lower[0] <= y[-1] <= fc.upper[0])


def pool_map(fn, seeds, workers):
    if workers <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(fn, seeds, chunksize=8))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000, help="replications for size/power/coverage")
    ap.add_argument("--fits", type=int, default=100, help="replications for estimator recovery")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", help="write results as JSON")
    args = ap.parse_args()

    res = {"seed": args.seed, "reps": args.reps, "n": N}
    t0 = time.time()
    rr = partial(rejection_rate, reps=args.reps, workers=args.workers)
    res["size"] = {
        "adf_random_walk": rr(adf5, random_walk, seed=args.seed),
        "ljung_box_white_noise": rr(lb10, white_noise, seed=args.seed + 1),
        "jarque_bera_normal": rr(jarque_bera, white_noise, seed=args.seed + 2),
    }
    res["power"] = {
        "adf_ar_0.5": rr(adf5, ar_half, seed=args.seed + 3),
        "ljung_box_ar_0.5": rr(lb10, ar_half, seed=args.seed + 4),
        "jarque_bera_t5": rr(jarque_bera, student_t5, seed=args.seed + 5),
    }

    root = np.random.SeedSequence(args.seed)
    s_ar, s_garch, s_cov = root.spawn(3)
    phi = np.array(pool_map(ar1_estimate, s_ar.spawn(args.fits), args.workers))
    res["ar1_recovery"] = {"mean_abs_error": float(np.mean(np.abs(phi - 0.7))),
                           "share_within_0.08": float(np.mean(np.abs(phi - 0.7) <= 0.08))}
    est = np.array(pool_map(garch_estimate, s_garch.spawn(args.fits), args.workers))
    mae = np.mean(np.abs(est - [0.1, 0.1, 0.8]), axis=0)
    res["garch_recovery_mae"] = dict(zip(["omega", "alpha", "beta"], map(float, mae)))
    res["one_step_coverage_95"] = float(np.mean(pool_map(coverage_hit, s_cov.spawn(args.reps), args.workers)))
    res["seconds"] = round(time.time() - t0, 1)

    text = json.dumps(res, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")


if __name__ == "__main__":
    main()
