"""Distribution helpers needed by the tests and the forecast bands."""
from __future__ import annotations

import math

from scipy import special


def chi_square_survival(x: float, df: int) -> float:
    """P(X > x) for X ~ chi-square(df), via the regularized upper incomplete gamma."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi-square statistic must be >= 0, got {x}")
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    return float(special.gammaincc(df / 2.0, x / 2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return float(special.ndtri(p))


INNOVATIONS = ("normal", "student_t", "gamma")


def standardized_draws(rng, size, dist="normal", shape=None):
    """Zero-mean, unit-variance i.i.d. draws.

    ``shape`` is the degrees of freedom for ``student_t`` (> 2) and the gamma
    shape k for ``gamma`` (draws are (G - k)/sqrt(k), G ~ Gamma(k, 1)).
    """
    if dist == "normal":
        return rng.standard_normal(size)
    if dist == "student_t":
        nu = 8.0 if shape is None else float(shape)
        if nu <= 2:
            raise ValueError("student_t needs more than 2 degrees of freedom")
        return rng.standard_t(nu, size) * math.sqrt((nu - 2.0) / nu)
    if dist == "gamma":
        k = 4.0 if shape is None else float(shape)
        return (rng.gamma(k, 1.0, size) - k) / math.sqrt(k)
    raise ValueError(f"unknown innovation distribution {dist!r}")
