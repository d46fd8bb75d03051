"""Numerical helpers shared by the ARIMA and GARCH estimators.

Parameter transforms map an unconstrained vector onto the admissible region,
so the simplex search never has to deal with constraints explicitly.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError

logger = logging.getLogger(__name__)

# raw coordinates beyond this are pushed back by a quadratic penalty
_BOX = 30.0


def pacf_to_ar(r):
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients.

    Uses the Durbin-Levinson update phi_j^(k) = phi_j^(k-1) - r_k phi_{k-j}^(k-1).
    """
    r = np.asarray(r, dtype=float)
    phi = np.zeros(0)
    for k, rk in enumerate(r, start=1):
        new = np.empty(k)
        new[: k - 1] = phi - rk * phi[::-1]
        new[k - 1] = rk
        phi = new
    return phi


def ar_to_pacf(phi):
    """Inverse of :func:`pacf_to_ar`. Raises if ``phi`` is not stationary."""
    phi = np.array(phi, dtype=float)
    r = np.zeros(len(phi))
    for k in range(len(phi), 0, -1):
        rk = phi[k - 1]
        if abs(rk) >= 1.0:
            raise ValueError("AR coefficients are not stationary")
        r[k - 1] = rk
        phi = (phi[: k - 1] + rk * phi[: k - 1][::-1]) / (1.0 - rk * rk)
    return r


def is_stationary(phi) -> bool:
    """True when every root of 1 - phi_1 z - ... - phi_p z^p lies outside the unit circle."""
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0 or not np.any(phi):
        return True
    roots = np.roots(np.r_[-phi[::-1], 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


def box_penalty(x) -> float:
    excess = np.maximum(np.abs(x) - _BOX, 0.0)
    return float(np.sum(excess**2))


def simplex_minimize(fun, x0, *, xatol=1e-8, fatol=1e-10, maxiter=None, restarts=3):
    """Nelder-Mead with restarts from the incumbent.

    A restart rebuilds the simplex around the best point, which guards against
    the premature collapse the method is known for. Returns the final
    ``OptimizeResult`` augmented with ``start_fun`` and ``nfev_total``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    maxiter = maxiter or max(2000, 800 * n)
    opts = dict(xatol=xatol, fatol=fatol, maxiter=maxiter, maxfev=2 * maxiter, adaptive=n > 3)

    start_fun = float(fun(x0))
    res = minimize(fun, x0, method="Nelder-Mead", options=opts)
    nfev = res.nfev
    for _ in range(restarts):
        prev = res.fun
        nxt = minimize(fun, res.x, method="Nelder-Mead", options=opts)
        nfev += nxt.nfev
        if nxt.fun <= res.fun:
            res = nxt
        if prev - nxt.fun <= fatol * max(1.0, abs(prev)):
            break
    res.start_fun = start_fun
    res.nfev_total = nfev
    if not res.success or not np.isfinite(res.fun):
        raise ConvergenceError(
            f"simplex search did not converge: {res.message}",
            {"x": res.x.tolist(), "fun": float(res.fun), "nfev": int(nfev)},
        )
    if res.fun > start_fun:
        # cannot happen for a descent method, but the invariant is cheap to enforce
        res.x, res.fun = x0, start_fun
    logger.debug("simplex converged: fun=%.10g nfev=%d", res.fun, nfev)
    return res


def hessian(f, x, rel_step=1e-4, floor=1e-3):
    """Central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(np.abs(x), floor)
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + 2 * ei) - 2 * f0 + f(x - 2 * ei)) / (4 * h[i] ** 2)
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


def jacobian(f, x, rel_step=1e-6, floor=1e-3):
    """Central-difference Jacobian of a vector function, shape (len(f(x)), len(x))."""
    x = np.asarray(x, dtype=float)
    h = rel_step * np.maximum(np.abs(x), floor)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h[i]))
    return np.column_stack(cols)


def covariance_from_loglik(loglik, per_obs, theta, robust=False):
    """Parameter covariance from the observed information, optionally sandwich-corrected.

    ``loglik`` maps theta to the total log-likelihood, ``per_obs`` to its
    per-observation contributions (only used when ``robust``).
    Returns a matrix of NaN when the information matrix is not invertible.
    """
    H = hessian(loglik, theta)
    try:
        inv_info = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        return np.full_like(H, np.nan)
    if not robust:
        return inv_info
    scores = jacobian(per_obs, theta)
    meat = scores.T @ scores
    return inv_info @ meat @ inv_info


def standard_errors(cov):
    d = np.diag(cov)
    with np.errstate(invalid="ignore"):
        return np.where(d > 0, np.sqrt(np.abs(d)), np.nan)
