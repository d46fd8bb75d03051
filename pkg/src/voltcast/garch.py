"""GARCH(p, q) error model for mean-equation residuals.

Z_t = sqrt(h_t) e_t with h_t = omega + sum_i alpha_i Z_{t-i}^2 + sum_j beta_j h_{t-j}
and sum(alpha) + sum(beta) < 1. ``p`` counts ARCH terms, ``q`` GARCH terms.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.signal import lfilter, lfiltic

from . import _numerics as num
from .dist import INNOVATIONS, standardized_draws
from .errors import DataError
from .series import as_array

logger = logging.getLogger(__name__)

_LOG2PI = math.log(2 * math.pi)
SIM_BURN_IN = 500


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: tuple[float, ...] = ()
    beta: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if not self.omega > 0:
            raise DataError(f"omega must be > 0, got {self.omega}")
        if any(a < 0 for a in self.alpha) or any(b < 0 for b in self.beta):
            raise DataError("ARCH and GARCH coefficients must be >= 0")
        if not self.persistence < 1:
            raise DataError(f"sum(alpha) + sum(beta) must be < 1, got {self.persistence}")

    @property
    def p(self) -> int:
        return len(self.alpha)

    @property
    def q(self) -> int:
        return len(self.beta)

    @property
    def persistence(self) -> float:
        return sum(self.alpha) + sum(self.beta)

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)


def conditional_variance(params: GarchParams, residuals, h0: float) -> np.ndarray:
    """Variance recursion driven by ``residuals``.

    Element t is omega + sum_i alpha_i Z[t+1-i]^2 + sum_j beta_j h[t-j], i.e.
    the variance of the *next* shock once Z[t] is known. Pre-sample squared
    shocks and variances are set to ``h0``.
    """
    z2 = np.asarray(residuals, dtype=float) ** 2
    p, q = params.p, params.q
    if z2.size < max(p, q) + 1:
        raise DataError(f"need at least {max(p, q) + 1} residuals")
    n = z2.size
    u = np.full(n, params.omega)
    for i, a in enumerate(params.alpha, start=1):
        lagged = np.r_[np.full(min(i - 1, n), h0), z2[: n - (i - 1)]]
        u = u + a * lagged
    if q == 0:
        return u
    denom = np.r_[1.0, -np.asarray(params.beta)]
    zi = lfiltic([1.0], denom, y=np.full(q, h0))
    h, _ = lfilter([1.0], denom, u, zi=zi)
    return h


def in_sample_variance(params: GarchParams, residuals, h0: float) -> np.ndarray:
    """Conditional variance of each residual: h0 for the first, then the recursion."""
    h = conditional_variance(params, residuals, h0)
    return np.r_[h0, h[:-1]]


# -- densities of the standardized innovation ------------------------------


def _log_density(e, dist, shape):
    if dist == "normal":
        return -0.5 * (_LOG2PI + e**2)
    if dist == "student_t":
        nu = shape
        c = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(math.pi * (nu - 2))
        return c - (nu + 1) / 2 * np.log1p(e**2 / (nu - 2))
    if dist == "gamma":
        k = shape
        sk = math.sqrt(k)
        x = k + sk * e
        with np.errstate(divide="ignore", invalid="ignore"):
            out = math.log(sk) + (k - 1) * np.log(x) - x - special.gammaln(k)
        return np.where(x > 0, out, -np.inf)
    raise ValueError(f"unknown innovation distribution {dist!r}")


def _loglik_terms(params, residuals, dist, shape, h0):
    z = np.asarray(residuals, dtype=float)
    h = in_sample_variance(params, z, h0)
    if np.any(h <= 0):
        return np.full(z.size, -np.inf)
    return -0.5 * np.log(h) + _log_density(z / np.sqrt(h), dist, shape)


def garch_loglik(params: GarchParams, residuals, dist: str = "normal", shape=None, h0: float | None = None) -> float:
    """Sum over t of -1/2 ln h_t + ln f(Z_t / sqrt(h_t)).

    ``h0`` defaults to the sample variance of ``residuals``.
    """
    z = as_array(residuals)
    if h0 is None:
        h0 = float(np.mean(z**2))
    return float(np.sum(_loglik_terms(params, z, dist, shape, h0)))


# -- model -----------------------------------------------------------------


@dataclass(eq=False)
class GarchModel:
    params: GarchParams
    dist: str
    shape: float | None
    h: np.ndarray  # conditional variance of each residual
    residuals: np.ndarray
    loglik: float
    h0: float
    h0_policy: str = "sample"
    stderr: dict = field(default_factory=dict)
    fit_info: dict = field(default_factory=dict)

    @property
    def param_names(self) -> list[str]:
        names = ["omega"] + [f"alpha[{i}]" for i in range(1, self.params.p + 1)]
        names += [f"beta[{j}]" for j in range(1, self.params.q + 1)]
        if self.dist == "student_t":
            names.append("nu")
        elif self.dist == "gamma":
            names.append("shape")
        return names

    @property
    def param_values(self) -> dict:
        vals = [self.params.omega, *self.params.alpha, *self.params.beta]
        if self.shape is not None:
            vals.append(self.shape)
        return dict(zip(self.param_names, (float(v) for v in vals)))

    @property
    def standardized_residuals(self) -> np.ndarray:
        return self.residuals / np.sqrt(self.h)

    @property
    def next_variance(self) -> float:
        return float(conditional_variance(self.params, self.residuals, self.h0)[-1])

    def to_dict(self):
        return {
            "order": [self.params.p, self.params.q],
            "dist": self.dist,
            "params": self.param_values,
            "stderr": self.stderr,
            "loglik": self.loglik,
            "h0": self.h0,
            "h0_policy": self.h0_policy,
            "fit_info": self.fit_info,
        }

    @classmethod
    def from_dict(cls, d, residuals):
        p, q = d["order"]
        v = d["params"]
        params = GarchParams(v["omega"], [v[f"alpha[{i}]"] for i in range(1, p + 1)],
                             [v[f"beta[{j}]"] for j in range(1, q + 1)])
        shape = v.get("nu", v.get("shape"))
        return from_params(params, residuals, d["dist"], shape, d["h0_policy"],
                           stderr=d.get("stderr"), fit_info=d.get("fit_info"))


def _initial_variance(params, z, policy):
    if policy == "sample":
        return float(np.mean(z**2))
    if policy == "unconditional":
        return params.unconditional_variance
    raise ValueError(f"unknown h0 policy {policy!r}")


def from_params(params: GarchParams, residuals, dist="normal", shape=None, h0="sample",
                stderr=None, fit_info=None) -> GarchModel:
    z = np.array(as_array(residuals), dtype=float)
    h0_val = _initial_variance(params, z, h0)
    h = in_sample_variance(params, z, h0_val)
    ll = float(np.sum(_loglik_terms(params, z, dist, shape, h0_val)))
    return GarchModel(params, dist, shape, h, z, ll, h0_val, h0, dict(stderr or {}), dict(fit_info or {}))


# unconstrained coordinates: [log omega, logits of alpha/beta against a slack term, shape transform]


def _to_params(x, p, q):
    omega = math.exp(min(x[0], 700.0))
    ex = np.exp(np.clip(x[1 : 1 + p + q], -700, 700))
    w = ex / (1.0 + ex.sum())
    return GarchParams(omega, w[:p], w[p:])


def _from_params(params):
    w = np.r_[params.alpha, params.beta]
    slack = 1.0 - w.sum()
    return np.r_[math.log(params.omega), np.log(np.maximum(w, 1e-12) / slack)]


def _shape_from_raw(dist, x):
    if dist == "student_t":
        return 2.0 + math.exp(min(x, 50.0))
    if dist == "gamma":
        return math.exp(min(x, 50.0))
    return None


def _raw_from_shape(dist, s):
    if dist == "student_t":
        return math.log(s - 2.0)
    return math.log(s)


def fit_garch(residuals, p: int = 1, q: int = 1, dist: str = "normal", h0: str = "sample",
              robust: bool = False, xatol: float = 1e-8) -> GarchModel:
    """Maximum-likelihood GARCH(p, q) fit.

    The residuals are standardized to unit variance for the search and omega
    is rescaled afterwards, so estimates are scale-equivariant. The parameter
    map keeps omega > 0, alpha, beta > 0 and their sum below one for every
    candidate the optimizer visits.
    """
    if dist not in INNOVATIONS:
        raise ValueError(f"unknown innovation distribution {dist!r}")
    if p < 0 or q < 0 or p + q == 0:
        raise ValueError("need p >= 0, q >= 0 and at least one of them positive")
    z = np.array(as_array(residuals), dtype=float)
    if z.size < 50:
        raise DataError(f"GARCH needs at least 50 residuals, got {z.size}")
    scale = math.sqrt(float(np.mean(z**2)))
    if scale == 0:
        raise DataError("residuals are identically zero")
    zs = z / scale
    has_shape = dist != "normal"
    npar = 1 + p + q

    def unpack(x):
        return _to_params(x, p, q), (_shape_from_raw(dist, x[-1]) if has_shape else None)

    def negll(x):
        try:
            params, shape = unpack(x)
        except DataError:
            return 1e100
        h0_val = _initial_variance(params, zs, h0)
        ll = np.sum(_loglik_terms(params, zs, dist, shape, h0_val))
        if not np.isfinite(ll):
            return 1e100
        return -ll + num.box_penalty(x)

    # a small grid of persistence patterns; the best one seeds the simplex
    starts = []
    for a_tot, b_tot in [(0.05, 0.05), (0.1, 0.8), (0.05, 0.9), (0.2, 0.5), (0.4, 0.2), (0.7, 0.1)]:
        if q == 0:
            a_tot, b_tot = a_tot + b_tot, 0.0
        elif p == 0:
            a_tot, b_tot = 0.0, a_tot + b_tot
        alpha = [a_tot / p] * p if p else []
        beta = [b_tot / q] * q if q else []
        g = GarchParams(1.0 - a_tot - b_tot, alpha, beta)
        x = _from_params(g)
        if has_shape:
            for s in ((8.0, 30.0) if dist == "student_t" else (4.0, 50.0)):
                starts.append(np.r_[x, _raw_from_shape(dist, s)])
        else:
            starts.append(x)
    x0 = min(starts, key=negll)
    res = num.simplex_minimize(negll, x0, xatol=xatol)
    params_s, shape = unpack(res.x)

    # standard errors in natural coordinates on the standardized scale
    h0_fixed = _initial_variance(params_s, zs, h0)

    def per_obs(theta):
        om, coefs = theta[0], theta[1:npar]
        sh = theta[npar] if has_shape else None
        if om <= 0 or (has_shape and sh <= (2.0 if dist == "student_t" else 0.0)):
            return np.full(zs.size, -1e100)
        try:
            g = GarchParams.__new__(GarchParams)
            object.__setattr__(g, "omega", om)
            object.__setattr__(g, "alpha", tuple(coefs[:p]))
            object.__setattr__(g, "beta", tuple(coefs[p:]))
            return _loglik_terms(g, zs, dist, sh, h0_fixed)
        except (ValueError, FloatingPointError):
            return np.full(zs.size, -1e100)

    theta = np.r_[params_s.omega, params_s.alpha, params_s.beta, [shape] if has_shape else []]
    with np.errstate(all="ignore"):
        cov = num.covariance_from_loglik(lambda t: float(np.sum(per_obs(t))), per_obs, theta, robust)
    unit = np.r_[scale**2, np.ones(p + q), [1.0] if has_shape else []]
    se = num.standard_errors(cov) * unit

    params = GarchParams(params_s.omega * scale**2, params_s.alpha, params_s.beta)
    g0, shape0 = unpack(x0)
    g0 = GarchParams(g0.omega * scale**2, g0.alpha, g0.beta)
    start_ll = float(np.sum(_loglik_terms(g0, z, dist, shape0, _initial_variance(g0, z, h0))))
    model = from_params(
        params, z, dist, shape, h0,
        fit_info={"converged": True, "nfev": int(res.nfev_total), "start_objective": float(res.start_fun),
                  "start_loglik": start_ll, "robust_se": robust, "method": "mle-nelder-mead"},
    )
    model.stderr = dict(zip(model.param_names, (float(s) for s in se)))
    logger.info("GARCH(%d,%d) %s loglik=%.4f persistence=%.4f", p, q, dist, model.loglik, params.persistence)
    return model


def forecast_variance(model: GarchModel, horizon: int) -> np.ndarray:
    """h_{T+1..T+horizon}; beyond one step the unknown Z^2 are replaced by their forecasts."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    par = model.params
    p, q = par.p, par.q
    z2 = model.residuals**2
    # variance path including the pre-sample value, aligned with z2
    h_all = np.r_[model.h, model.next_variance]
    m = max(p, q, 1)
    past_z2 = list(np.r_[np.full(m, model.h0), z2][-m:])
    past_h = list(np.r_[np.full(m, model.h0), model.h][-m:])
    out = np.empty(horizon)
    out[0] = h_all[-1]
    past_z2.append(out[0])  # E[Z_{T+1}^2] = h_{T+1}
    past_h.append(out[0])
    for k in range(1, horizon):
        val = par.omega
        for i, a in enumerate(par.alpha, start=1):
            val += a * past_z2[-i]
        for j, b in enumerate(par.beta, start=1):
            val += b * past_h[-j]
        out[k] = val
        past_z2.append(val)
        past_h.append(val)
    return out


def simulate_garch(params: GarchParams, n: int, seed=None, dist: str = "normal", shape=None,
                   burn: int = SIM_BURN_IN) -> tuple[np.ndarray, np.ndarray]:
    """Simulate (Z, h) with h[t] the conditional variance of Z[t]; deterministic for a fixed seed."""
    if not isinstance(params, GarchParams):
        raise DataError("params must be GarchParams")
    rng = np.random.default_rng(seed)
    total = n + burn
    e = standardized_draws(rng, total, dist, shape)
    p, q = params.p, params.q
    m = max(p, q, 1)
    hbar = params.unconditional_variance
    z = np.zeros(total + m)
    h = np.full(total + m, hbar)
    z[:m] = math.sqrt(hbar)
    alpha = np.asarray(params.alpha)
    beta = np.asarray(params.beta)
    for t in range(m, total + m):
        ht = params.omega
        if p:
            ht += alpha @ z[t - p : t][::-1] ** 2
        if q:
            ht += beta @ h[t - q : t][::-1]
        h[t] = ht
        z[t] = math.sqrt(ht) * e[t - m]
    return z[m + burn :], h[m + burn :]


@dataclass(frozen=True)
class VolatilityCluster:
    start: int
    end: int
    peak_variance: float


def detect_clusters(h, threshold_multiple: float = 2.0, window: int | None = None) -> list[VolatilityCluster]:
    """Maximal runs where h exceeds ``threshold_multiple`` times the median of h.

    With ``window`` the median is taken over a centered rolling window instead
    of the whole path.
    """
    h = as_array(h)
    if np.any(h <= 0):
        raise DataError("conditional variances must be positive")
    if window:
        half = window // 2
        ref = np.array([np.median(h[max(0, t - half) : t + half + 1]) for t in range(h.size)])
    else:
        ref = np.full(h.size, np.median(h))
    above = h > threshold_multiple * ref
    clusters = []
    t = 0
    while t < h.size:
        if above[t]:
            s = t
            while t + 1 < h.size and above[t + 1]:
                t += 1
            clusters.append(VolatilityCluster(s, t, float(h[s : t + 1].max())))
        t += 1
    return clusters
