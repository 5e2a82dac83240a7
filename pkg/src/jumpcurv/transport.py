"""Exact W1 distances between finitely supported measures.

Two independent routes: the transportation LP (solved with HiGHS) for any
computable metric, and the cumulative-function formula for path metrics on
N.  Kantorovich-Rubinstein potentials certify the optimum from the dual side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.optimize import linprog

from .metric_space import PathMetric

WEIGHT_TOL = 1e-12


class TransportError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    support: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "weights", w)
        if len(self.support) == 0:
            raise TransportError("empty support")
        if len(set(self.support)) != len(self.support):
            raise TransportError("support entries must be distinct")
        if w.shape != (len(self.support),):
            raise TransportError("one weight per support point")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL * max(1, len(w)):
            raise TransportError(f"weights must be a probability vector (sum={w.sum()!r})")

    @classmethod
    def point(cls, x) -> "DiscreteMeasure":
        return cls((x,), np.ones(1))

    @classmethod
    def from_dense(cls, probs, states: Sequence | None = None, cutoff: float = 0.0) -> "DiscreteMeasure":
        """Measure from a probability row; entries <= cutoff are dropped and
        the rest renormalized only when a cutoff is given."""
        probs = np.asarray(probs, dtype=float)
        states = range(len(probs)) if states is None else states
        keep = probs > cutoff
        w = probs[keep]
        if cutoff > 0:
            w = w / w.sum()
        return cls(tuple(s for s, k in zip(states, keep) if k), w)

    def to_dict(self) -> dict:
        return {"support": list(self.support), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class TransportPlan:
    rows: tuple
    cols: tuple
    coupling: np.ndarray
    cost: float


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, metric) -> np.ndarray:
    if isinstance(metric, PathMetric):
        a = metric.cumulative(np.asarray(mu.support))
        b = metric.cumulative(np.asarray(nu.support))
        return np.abs(a[:, None] - b[None, :])
    return np.array([[metric.distance(x, y) for y in nu.support] for x in mu.support])


def wasserstein_primal(mu: DiscreteMeasure, nu: DiscreteMeasure, metric) -> tuple[float, TransportPlan]:
    C = cost_matrix(mu, nu, metric)
    m, n = C.shape
    # row-sum and column-sum equality constraints on the flattened plan
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    b = np.concatenate([mu.weights, nu.weights])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise TransportError(f"transport LP failed: {res.message}")
    plan = np.clip(res.x.reshape(m, n), 0.0, None)
    value = float(np.sum(plan * C))
    return value, TransportPlan(mu.support, nu.support, plan, value)


def _cdf_gap(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """F_mu(k) - F_nu(k) for k = 0..max support - 1."""
    top = max(max(mu.support), max(nu.support))
    dens = np.zeros(top + 1)
    np.add.at(dens, np.asarray(mu.support, dtype=np.int64), mu.weights)
    np.add.at(dens, np.asarray(nu.support, dtype=np.int64), -nu.weights)
    return np.cumsum(dens)[:-1]


def wasserstein_path_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, metric: PathMetric) -> float:
    """sum_k u_k |F_mu(k) - F_nu(k)|."""
    gap = _cdf_gap(mu, nu)
    return float(np.dot(metric.weights(np.arange(len(gap))), np.abs(gap)))


def wasserstein_rows(P: np.ndarray, Qr: np.ndarray, metric: PathMetric) -> np.ndarray:
    """Row-wise W1 between dense probability rows on {0..n-1}."""
    gap = np.cumsum(P - Qr, axis=-1)[..., :-1]
    u = metric.weights(np.arange(gap.shape[-1]))
    return np.abs(gap) @ u


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, metric) -> float:
    if isinstance(metric, PathMetric):
        return wasserstein_path_1d(mu, nu, metric)
    return wasserstein_primal(mu, nu, metric)[0]


@dataclass(frozen=True)
class DualCertificate:
    support: tuple
    potential: np.ndarray
    lipschitz: float
    dual_value: float
    gap: float
    verified: bool


def _dual_lp(points, d, dm):
    """max sum f(z) dm(z) s.t. f(z) - f(w) <= d(z, w), f(points[0]) = 0."""
    n = len(points)
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(n)
                r[i], r[j] = 1.0, -1.0
                rows.append(r)
                rhs.append(d[i, j])
    bounds = [(0, 0)] + [(None, None)] * (n - 1)
    if n == 1:
        return np.zeros(1)
    res = linprog(-dm, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
    if res.status != 0:
        raise TransportError(f"dual LP failed: {res.message}")
    return res.x


def dual_certificate(mu: DiscreteMeasure, nu: DiscreteMeasure, metric, W: float, tol: float = 1e-9) -> DualCertificate:
    """1-Lipschitz potential f on the union support with
    |int f dmu - int f dnu| >= W - tol.

    Path metrics use f(x) = sum_{k<x} u_k sign(F_mu(k) - F_nu(k)); other
    metrics solve the Kantorovich-Rubinstein dual LP directly.
    """
    points = tuple(sorted(set(mu.support) | set(nu.support), key=repr))
    index = {p: i for i, p in enumerate(points)}
    dm = np.zeros(len(points))
    for p, w in zip(mu.support, mu.weights):
        dm[index[p]] += w
    for p, w in zip(nu.support, nu.weights):
        dm[index[p]] -= w
    if isinstance(metric, PathMetric):
        gap = _cdf_gap(mu, nu)
        steps = metric.weights(np.arange(len(gap))) * np.sign(gap)
        f_all = np.concatenate(([0.0], np.cumsum(steps)))
        f = f_all[np.asarray(points, dtype=np.int64)]
        d = np.abs(metric.cumulative(np.asarray(points))[:, None] - metric.cumulative(np.asarray(points))[None, :])
    else:
        d = np.array([[metric.distance(x, y) for y in points] for x in points])
        f = _dual_lp(points, d, dm)
    diff = np.abs(f[:, None] - f[None, :])
    off = d > 0
    lip = float(np.max(diff[off] / d[off])) if off.any() else 0.0
    dual_value = abs(float(np.dot(f, dm)))
    gap = W - dual_value
    verified = lip <= 1.0 + tol and dual_value >= W - tol
    return DualCertificate(points, f, lip, dual_value, gap, verified)
