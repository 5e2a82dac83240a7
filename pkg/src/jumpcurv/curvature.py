"""Wasserstein curvature and the jump constants feeding the deviation bounds.

For birth-death chains and a path metric with weights u, the curvature is
the infimum over x of

    nu_{x+1} + lambda_x - nu_x u_{x-1}/u_x - lambda_{x+1} u_{x+1}/u_x,

which is what ``birth_death_curvature`` scans.  For other finite chains the
curvature is estimated from measured W1 contraction ratios of the semigroup.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .jump_process import BirthDeathRates, semigroup_rows
from .metric_space import PathMetric, TrivialMetric
from .transport import DiscreteMeasure, wasserstein, wasserstein_rows


class BoundInapplicable(ValueError):
    """A constant needed by the deviation bound is infinite or nonpositive."""


class AssumptionAFailure(BoundInapplicable):
    def __init__(self, message: str, x: int | None = None):
        super().__init__(message)
        self.x = x


@dataclass(frozen=True)
class CurvatureCertificate:
    sigma: float
    method: str
    metric: str
    truncation: int | None
    trace: tuple = ()
    argmin: int | None = None
    tail_limit: float | None = None
    attained: bool = True
    tail_verified: bool = True
    extrapolated: float | None = None

    def to_dict(self) -> dict:
        def num(v):
            if v is None:
                return None
            return v if math.isfinite(v) else ("-inf" if v < 0 else "inf")

        return {
            "sigma": num(self.sigma),
            "method": self.method,
            "metric": self.metric,
            "truncation": self.truncation,
            "argmin": self.argmin,
            "attained": self.attained,
            "tail_limit": num(self.tail_limit),
            "tail_verified": self.tail_verified,
            "extrapolated": num(self.extrapolated),
            "trace": [[num(a) for a in row] if isinstance(row, (tuple, list)) else num(row) for row in self.trace],
        }


def _weights(metric, xs):
    if isinstance(metric, TrivialMetric):
        # on N the trivial metric agrees with u = 1 only on two-point spaces
        raise TypeError("birth-death formulas need a path metric")
    return np.where(xs < 0, 1.0, metric.weights(np.maximum(xs, 0)))


def curvature_profile(rates: BirthDeathRates, metric: PathMetric, top: int) -> np.ndarray:
    """Pointwise curvature expression for x = 0..top (pairs (x, x+1))."""
    xs = np.arange(top + 1)
    u = _weights(metric, xs)
    u_prev = _weights(metric, xs - 1)
    u_next = _weights(metric, xs + 1)
    lam, nu = rates.birth(xs), rates.death(xs)
    lam1, nu1 = rates.birth(xs + 1), rates.death(xs + 1)
    return nu1 + lam - nu * u_prev / u - lam1 * u_next / u


def _analytic_tail(rates: BirthDeathRates, metric: PathMetric) -> float | None:
    if rates.max_state is not None:
        return None
    if rates.kind == "mm_infinity" and metric.kind == "classical":
        return rates.nu
    if rates.kind == "mm_infinity" and metric.kind == "inv_sqrt":
        return rates.nu / 2
    if rates.kind == "constant" and metric.kind == "classical":
        return 0.0
    return None


def _diverging_down(values: np.ndarray) -> bool:
    """Minimum at the end of the scan with decrements that do not shrink."""
    if len(values) < 8 or int(np.argmin(values)) != len(values) - 1:
        return False
    q = len(values) // 4
    late = values[-1] - values[-2]
    early = values[-q] - values[-q - 1]
    return late < 0 and late <= early + 1e-12 * abs(early)


def birth_death_curvature(rates: BirthDeathRates, metric: PathMetric, truncation: int = 1000) -> CurvatureCertificate:
    if truncation < 10 and rates.max_state is None:
        raise ValueError("truncation must be at least 10")
    top = truncation if rates.max_state is None else rates.max_state - 1
    values = curvature_profile(rates, metric, top)
    k = int(np.argmin(values))
    scan_min = float(values[k])
    tail = _analytic_tail(rates, metric)
    trace = tuple(float(v) for v in values)
    if rates.max_state is not None:
        return CurvatureCertificate(scan_min, "exact-formula", repr(metric), rates.max_state, trace, k)
    if tail is not None:
        sigma = min(scan_min, tail)
        attained = scan_min <= tail
        return CurvatureCertificate(sigma, "exact-formula", repr(metric), truncation, trace, k,
                                    tail_limit=tail, attained=attained, tail_verified=True)
    if _diverging_down(values):
        return CurvatureCertificate(-math.inf, "exact-formula", repr(metric), truncation, trace, k,
                                    attained=False, tail_verified=False)
    return CurvatureCertificate(scan_min, "exact-formula", repr(metric), truncation, trace, k,
                                attained=k < top, tail_verified=False)


def coupling_drift(rates: BirthDeathRates, metric: PathMetric, x: int, y: int) -> float:
    """Drift of the path metric under the classical (independent) coupling."""
    if x == y:
        return 0.0
    if x > y:
        x, y = y, x
    lam_x, nu_x = float(rates.birth(x)), float(rates.death(x))
    lam_y, nu_y = float(rates.birth(y)), float(rates.death(y))
    w = metric.weight
    return lam_y * w(y) - nu_y * w(y - 1) - lam_x * w(x) + nu_x * w(x - 1)


def coupling_drift_adjacent(rates: BirthDeathRates, metric: PathMetric, top: int) -> np.ndarray:
    """Drift at (k, k+1) for k = 0..top-1, vectorized."""
    ks = np.arange(top + 1)
    u = _weights(metric, ks)
    u_prev = _weights(metric, ks - 1)
    g = rates.birth(ks) * u - rates.death(ks) * u_prev
    return g[1:] - g[:-1]


@dataclass(frozen=True)
class JumpConstants:
    b: float
    V2: float
    truncation: int | None
    b_attained: bool = True
    V2_attained: bool = True


def jump_bound_b(rates, metric, truncation: int = 1000) -> tuple[float, bool]:
    """Largest single-jump distance.  Returns (b, attained)."""
    if isinstance(rates, BirthDeathRates) and isinstance(metric, PathMetric):
        top = truncation if rates.max_state is None else rates.max_state - 1
        u = metric.weights(np.arange(top + 1))
        b = float(u.max())
        attained = rates.max_state is not None or metric.nonincreasing or b >= metric.tail_weight_limit()
        return b, attained
    best = 0.0
    for x in _scan_states(rates, truncation):
        for y, _ in rates.jumps(x):
            best = max(best, metric.distance(x, y))
    return best, rates.states is not None


def _scan_states(gen, truncation):
    if gen.states is not None:
        return gen.states
    return range(truncation + 1)


def _growing(values: np.ndarray) -> bool:
    if len(values) < 8:
        return False
    return int(np.argmax(values)) == len(values) - 1 and values[-1] > values[-2]


def second_moment_V2(rates, metric, truncation: int = 1000) -> tuple[float, bool]:
    """sup_x of the jump-rate-weighted mean square jump distance."""
    if isinstance(rates, BirthDeathRates) and isinstance(metric, PathMetric):
        top = truncation if rates.max_state is None else rates.max_state
        xs = np.arange(top + 1)
        vals = rates.birth(xs) * metric.weights(xs) ** 2 + rates.death(xs) * _weights(metric, xs - 1) ** 2
    else:
        vals = np.array([sum(r * metric.distance(x, y) ** 2 for y, r in rates.jumps(x))
                         for x in _scan_states(rates, truncation)])
    if rates.states is None and _growing(vals):
        raise BoundInapplicable(f"V^2 grows without bound over the truncation (value {vals[-1]:.4g} at the end)")
    return float(vals.max()), True


def jump_constants(rates, metric, truncation: int = 1000) -> JumpConstants:
    b, b_att = jump_bound_b(rates, metric, truncation)
    v2, v_att = second_moment_V2(rates, metric, truncation)
    return JumpConstants(b, v2, truncation, b_att, v_att)


@dataclass(frozen=True)
class AssumptionAConstants:
    K: float
    C_A: float
    truncation: int | None

    @property
    def b(self) -> float:
        return self.C_A / math.sqrt(self.K)

    @property
    def V2(self) -> float:
        return 2.0 * self.C_A ** 2


def check_assumption_A(rates: BirthDeathRates, metric: PathMetric, truncation: int = 1000) -> AssumptionAConstants:
    """Smallest K, C_A with min(inf lambda, inf nu) >= K and
    u_x <= C_A * min(nu_{x+1}, lambda_x)^{-1/2}, i.e.
    C_A = sup_x u_x sqrt(max(nu_{x+1}, lambda_x)), scanned up to ``truncation``."""
    top = truncation if rates.max_state is None else rates.max_state - 1
    xs = np.arange(top + 1)
    lam = rates.birth(xs)
    nu_next = rates.death(xs + 1)
    nu = nu_next
    K = float(min(lam.min(), nu.min()))
    if not K > 0:
        raise AssumptionAFailure("rates are not bounded away from zero", int(np.argmin(lam)))
    if rates.max_state is None:
        q = len(lam) // 4
        lam_min_late, lam_min_early = lam[-1], lam[-q]
        if lam_min_late < lam_min_early and int(np.argmin(lam)) == len(lam) - 1:
            raise AssumptionAFailure("birth rates decay toward zero", top)
        if nu[-1] < nu[-q] and int(np.argmin(nu)) == len(nu) - 1:
            raise AssumptionAFailure("death rates decay toward zero", top)
    ratio = metric.weights(xs) * np.sqrt(np.maximum(nu_next, lam))
    if rates.max_state is None and _growing(ratio):
        raise AssumptionAFailure("no finite C: u_x sqrt(rate) grows over the truncation", top)
    return AssumptionAConstants(K, float(ratio.max()), truncation)


def estimate_curvature_numeric(
    gen,
    metric,
    t_grid: Sequence[float],
    truncation: Sequence | None = None,
    tol: float = 1e-12,
) -> CurvatureCertificate:
    """min over the grid of -log(rho(t)) / t, rho(t) the worst W1 contraction
    ratio over all state pairs of the (truncated) chain."""
    states = tuple(gen.states if truncation is None else truncation)
    trace = []
    for t in sorted(t_grid):
        rows = semigroup_rows(gen, t, states, states, tol).rows
        rho, pair = _worst_ratio(rows, states, metric)
        sigma_bar = -math.log(rho)
        trace.append((float(t), float(rho), sigma_bar / t))
    per_t = np.array([r[2] for r in trace])
    k = int(np.argmin(per_t))
    extrap = None
    if len(trace) >= 2:
        (t1, _, s1), (t2, _, s2) = trace[0], trace[1]
        extrap = s1 - t1 * (s2 - s1) / (t2 - t1)
    return CurvatureCertificate(
        float(per_t[k]), "numeric-contraction", repr(metric), len(states), tuple(trace), k,
        attained=True, tail_verified=truncation is None, extrapolated=extrap,
    )


def _worst_ratio(rows: np.ndarray, states: tuple, metric) -> tuple[float, tuple]:
    n = len(states)
    if isinstance(metric, PathMetric):
        ii, jj = np.triu_indices(n, 1)
        w = wasserstein_rows(rows[ii], rows[jj], metric)
        cum = metric.cumulative(np.asarray(states))
        d = np.abs(cum[ii] - cum[jj])
        ratios = w / d
        k = int(np.argmax(ratios))
        return float(ratios[k]), (states[ii[k]], states[jj[k]])
    best, pair = 0.0, None
    measures = [DiscreteMeasure.from_dense(np.clip(r, 0, None) / np.clip(r, 0, None).sum(), states) for r in rows]
    for i, j in itertools.combinations(range(n), 2):
        r = wasserstein(measures[i], measures[j], metric) / metric.distance(states[i], states[j])
        if r > best:
            best, pair = r, (states[i], states[j])
    return best, pair


def tensorize(components: Sequence[tuple[float, float, float]], N: int) -> tuple[float, float, float]:
    """(min sigma_i / N, max b_i, sum V2_i / N)."""
    if not components:
        raise ValueError("need at least one component")
    if len(components) == 1 and N > 1:
        components = list(components) * N
    sig = min(c[0] for c in components) / N
    b = max(c[1] for c in components)
    v2 = sum(c[2] for c in components) / N
    return sig, b, v2
