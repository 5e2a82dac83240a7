"""Closed-form Poisson-type deviation bounds for empirical means.

Everything is exposed both as an exponent and as a probability so that
large exponents never underflow silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

G_SERIES_CUTOFF = 1e-4


def g(u):
    """g(u) = (1+u) log(1+u) - u, with a 5-term series below 1e-4."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("g is defined for u >= 0")
    small = u < G_SERIES_CUTOFF
    us = np.where(small, u, 0.0)
    series = us**2 / 2 - us**3 / 6 + us**4 / 12 - us**5 / 20 + us**6 / 30
    ul = np.where(small, 1.0, u)
    direct = (1 + ul) * np.log1p(ul) - ul
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def h(tau, t, z, sigma: float, b: float, V2: float):
    """Laplace-transform exponent V^2 (1 - e^{-2 sigma t}) / (2 b^2 sigma) * (e^{tau z} - tau z - 1)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    tz = np.asarray(tau, dtype=float) * np.asarray(z, dtype=float)
    coef = V2 * -np.expm1(-2.0 * sigma * np.asarray(t, dtype=float)) / (2.0 * b * b * sigma)
    out = coef * (np.expm1(tz) - tz)
    return float(out) if np.ndim(out) == 0 else out


def chernoff_exponent(c: float, z: float, y: float) -> float:
    """inf_{tau > 0} {-tau y + c (e^{tau z} - tau z - 1)} = -c g(y / (c z)).

    The minimizer is tau* = log(1 + y/(c z)) / z.
    """
    return -c * g(y / (c * z))


def chernoff_argmin(c: float, z: float, y: float) -> float:
    return math.log1p(y / (c * z)) / z


def s_weights(times, sigma: float) -> np.ndarray:
    """s_k = sum_{l >= k} exp(-sigma (t_l - t_k)), computed in log space."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("need a nonempty 1-d time list")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    neg = -sigma * times
    log_tail = np.logaddexp.accumulate(neg[::-1])[::-1]
    s = np.exp(log_tail + sigma * times)
    s[-1] = 1.0
    return s


@dataclass(frozen=True)
class BoundParams:
    sigma: float
    b: float
    V2: float
    lip: float
    mean_dist: float = 0.0
    mean_dist_tol: float = 0.0

    def __post_init__(self):
        for name in ("sigma", "b", "V2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if not (self.lip >= 0 and math.isfinite(self.lip)):
            raise ValueError("lip must be finite and nonnegative")
        if not math.isfinite(self.mean_dist) or self.mean_dist < 0:
            raise ValueError("mean_dist must be finite and nonnegative")

    @property
    def coefficient(self) -> float:
        return self.V2 / self.b**2


def tensorized_laplace_bound(times, tau: float, params: BoundParams, lip_n: float) -> float:
    """Log of the bound on the Laplace transform of a Lipschitz function of
    the sampled path (X_{t_1}, ..., X_{t_n}): sum_k h(tau, t_k - t_{k-1}, s_k b lip_n)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    times = np.asarray(times, dtype=float)
    s = s_weights(times, params.sigma)
    dt = np.diff(np.concatenate(([0.0], times)))
    return float(np.sum(h(tau, dt, s * params.b * lip_n, params.sigma, params.b, params.V2)))


def bias_M(sigma: float, t: float, lip: float, mean_dist: float) -> float:
    """(1 - e^{-sigma t}) lip / (sigma t) * mean_dist."""
    if t <= 0:
        raise ValueError("t must be positive")
    return -math.expm1(-sigma * t) * lip / (sigma * t) * mean_dist


def thm26_exponent(params: BoundParams, t: float, y):
    if params.lip == 0:
        return np.full(np.shape(y), math.inf) if np.ndim(y) else math.inf
    arg = params.b * np.asarray(y, dtype=float) * params.sigma / (
        params.V2 * -math.expm1(-params.sigma * t) * params.lip)
    out = params.coefficient * t * g(arg)
    return out


def bound_thm26(params: BoundParams, t: float, y):
    """2 exp(-(V^2 t / b^2) g(b y sigma / (V^2 (1 - e^{-sigma t}) lip)))."""
    out = 2.0 * np.exp(-np.asarray(thm26_exponent(params, t, y)))
    return float(out) if np.ndim(out) == 0 else out


def A_n(params: BoundParams, t: float, y: float, n: int) -> float:
    """Pre-limit exponent for the Riemann sum over the regular n-subdivision."""
    s, V2, b = params.sigma, params.V2, params.b
    a1 = -math.expm1(-s * t / n)
    a2 = -math.expm1(-2 * s * t / n)
    arg = 2 * b * y * s * a1 / (V2 * a2 * -math.expm1(-s * t) * params.lip)
    return n * V2 / (2 * b * b * s) * a2 * g(arg)


def cor47_params(K: float, C_A: float, sigma_delta: float, lip: float, mean_dist: float = 0.0) -> BoundParams:
    return BoundParams(sigma_delta, C_A / math.sqrt(K), 2 * C_A**2, lip, mean_dist)


def cor47_exponent(K: float, C_A: float, sigma_delta: float, lip: float, t: float, y):
    arg = np.asarray(y, dtype=float) * sigma_delta / (
        2 * math.sqrt(K) * C_A * -math.expm1(-sigma_delta * t) * lip)
    return 2 * K * t * g(arg)


def bound_cor47(K: float, C_A: float, sigma_delta: float, lip: float, t: float, y):
    """2 exp(-2 K t g(y sigma / (2 sqrt(K) C_A (1 - e^{-sigma t}) lip)))."""
    for v in (K, C_A, sigma_delta, lip, t):
        if not v > 0:
            raise ValueError("all parameters must be positive")
    out = 2.0 * np.exp(-np.asarray(cor47_exponent(K, C_A, sigma_delta, lip, t, y)))
    return float(out) if np.ndim(out) == 0 else out


def mminf_mean(x0: int, t: float, lam: float, nu: float) -> float:
    p = math.exp(-nu * t)
    return x0 * p + lam / nu * -math.expm1(-nu * t)


def mminf_transient_tail(x0: int, t: float, lam: float, nu: float, y):
    """One-sided bound exp{y - (m + y) log(1 + y/m)}, m = E_x[X_t]."""
    m = mminf_mean(x0, t, lam, nu)
    out = np.exp(-m * g(np.asarray(y, dtype=float) / m))
    return float(out) if np.ndim(out) == 0 else out


def poisson_tail_bound(xi: float, y):
    """The t -> infinity limit of ``mminf_transient_tail``."""
    out = np.exp(-xi * g(np.asarray(y, dtype=float) / xi))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BoundCurve:
    t: float
    y: np.ndarray
    exponent: np.ndarray
    bound: np.ndarray
    bias: float
    bias_tol: float = 0.0
    kind: str = "thm26"

    def rows(self):
        for y, e, p in zip(self.y, self.exponent, self.bound):
            yield float(y), float(e), float(p), float(self.bias)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t": self.t,
            "bias": self.bias,
            "bias_tol": self.bias_tol,
            "y": [float(v) for v in self.y],
            "exponent": [float(v) for v in self.exponent],
            "bound": [float(v) for v in self.bound],
        }


def bound_curve(params: BoundParams, t: float, y_grid, kind: str = "thm26") -> BoundCurve:
    y = np.asarray(y_grid, dtype=float)
    expo = np.atleast_1d(np.asarray(thm26_exponent(params, t, y), dtype=float))
    bias = bias_M(params.sigma, t, params.lip, params.mean_dist)
    tol = bias_M(params.sigma, t, params.lip, params.mean_dist_tol)
    return BoundCurve(t, y, expo, np.minimum(2.0, 2.0 * np.exp(-expo)), bias, tol, kind)
