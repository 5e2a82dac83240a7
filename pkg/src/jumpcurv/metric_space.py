"""Metrics on countable state spaces and Lipschitz seminorms of observables.

Path metrics on the integers are built from positive edge weights ``u_k``::

    delta(x, y) = |U(x) - U(y)|,   U(x) = u_0 + ... + u_{x-1}

Because such a metric is additive along the integer line, the Lipschitz
seminorm of ``f`` telescopes: for ``x < y``,

    |f(y) - f(x)| <= sum_{k=x}^{y-1} |f(k+1) - f(k)|
                  <= max_k (|f(k+1) - f(k)| / u_k) * delta(x, y),

so the supremum over all pairs equals the supremum over adjacent pairs.
``lipschitz_seminorm`` therefore only scans adjacent ratios.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

State = Any

METRIC_KINDS = ("classical", "inv_sqrt", "trivial", "table")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class TrivialMetric:
    """d(x, y) = 1 if x != y else 0."""

    kind: str = field(default="trivial", init=False)

    def distance(self, x: State, y: State) -> float:
        return 0.0 if x == y else 1.0

    __call__ = distance

    def to_dict(self) -> dict:
        return {"kind": "trivial"}


@dataclass(frozen=True, eq=False)
class PathMetric:
    """Weighted path metric on the nonnegative integers.

    ``kind`` is one of ``classical`` (u = 1), ``inv_sqrt`` (u_x = (x+1)^-1/2)
    or ``table``.  A table must carry a tail rule: ``("constant", c)`` extends
    with weight ``c`` beyond the table, ``("inv_sqrt", scale)`` uses
    ``scale * (x+1)^-1/2``.
    """

    kind: str = "classical"
    table: tuple[float, ...] = ()
    tail: tuple[str, float] | None = None

    def __post_init__(self):
        if self.kind not in ("classical", "inv_sqrt", "table"):
            raise MetricError(f"unknown path metric kind {self.kind!r}")
        if self.kind == "table":
            if not self.table:
                raise MetricError("table metric needs at least one weight")
            if any(w <= 0 or not math.isfinite(w) for w in self.table):
                raise MetricError("all weights must be positive and finite")
            if self.tail is None:
                raise MetricError("table metric must declare a tail rule")
            rule, value = self.tail
            if rule not in ("constant", "inv_sqrt") or not value > 0:
                raise MetricError(f"bad tail rule {self.tail!r}")
        object.__setattr__(self, "_cum", np.zeros(1))
        object.__setattr__(self, "_lock", threading.Lock())

    @classmethod
    def classical(cls) -> "PathMetric":
        return cls("classical")

    @classmethod
    def inv_sqrt(cls) -> "PathMetric":
        return cls("inv_sqrt")

    @classmethod
    def from_table(cls, weights: Sequence[float], tail: tuple[str, float]) -> "PathMetric":
        return cls("table", tuple(float(w) for w in weights), (str(tail[0]), float(tail[1])))

    def weights(self, k) -> np.ndarray:
        """Edge weights u_k for integer array ``k >= 0``."""
        k = np.asarray(k, dtype=np.int64)
        if self.kind == "classical":
            return np.ones(k.shape)
        if self.kind == "inv_sqrt":
            return 1.0 / np.sqrt(k + 1.0)
        table = np.asarray(self.table)
        rule, value = self.tail
        if rule == "constant":
            ext = np.full(k.shape, value)
        else:
            ext = value / np.sqrt(k + 1.0)
        inside = k < len(table)
        return np.where(inside, table[np.minimum(k, len(table) - 1)], ext)

    def weight(self, k: int) -> float:
        # u_{-1} := 1 by convention; it only ever multiplies a zero death rate.
        if k < 0:
            return 1.0
        return float(self.weights(k))

    @property
    def nonincreasing(self) -> bool:
        """True when the weight sequence is known to be nonincreasing."""
        if self.kind in ("classical", "inv_sqrt"):
            return True
        table = np.asarray(self.table)
        rule, value = self.tail
        tail_start = value if rule == "constant" else value / math.sqrt(len(table) + 1)
        return bool(np.all(np.diff(table) <= 0) and tail_start <= table[-1])

    def tail_weight_limit(self) -> float:
        """lim_{k -> inf} u_k."""
        if self.kind == "classical":
            return 1.0
        if self.kind == "inv_sqrt":
            return 0.0
        rule, value = self.tail
        return value if rule == "constant" else 0.0

    def cumulative(self, x) -> np.ndarray:
        """U(x) = sum_{k<x} u_k, vectorized."""
        x = np.asarray(x, dtype=np.int64)
        if x.size and x.min() < 0:
            raise MetricError("path metric states must be nonnegative")
        top = int(x.max()) if x.size else 0
        cum = self._cum
        if top >= len(cum):
            with self._lock:
                cum = self._cum
                if top >= len(cum):
                    size = max(top + 1, 2 * len(cum), 64)
                    u = self.weights(np.arange(size - 1))
                    cum = np.concatenate(([0.0], np.cumsum(u)))
                    object.__setattr__(self, "_cum", cum)
        return cum[x]

    def distance(self, x: int, y: int) -> float:
        if x == y:
            return 0.0
        ux, uy = self.cumulative([x, y])
        return float(abs(ux - uy))

    __call__ = distance

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "weights": list(self.table), "tail": list(self.tail)}
        return {"kind": self.kind}

    def __eq__(self, other):
        if not isinstance(other, PathMetric):
            return NotImplemented
        return (self.kind, self.table, self.tail) == (other.kind, other.table, other.tail)

    def __hash__(self):
        return hash((self.kind, self.table, self.tail))

    def __repr__(self):
        if self.kind == "table":
            return f"PathMetric(table[{len(self.table)}], tail={self.tail})"
        return f"PathMetric({self.kind})"


@dataclass(frozen=True)
class ProductMetric:
    """l1 metric on N-fold products of a base metric."""

    base: Any
    dim: int

    def distance(self, x: Sequence, y: Sequence) -> float:
        return product_distance(self, x, y)

    __call__ = distance

    @property
    def kind(self) -> str:
        return f"product({self.base.kind},{self.dim})"

    def to_dict(self) -> dict:
        return {"kind": "product", "base": self.base.to_dict(), "dim": self.dim}


def path_distance(metric: PathMetric, x: int, y: int) -> float:
    return metric.distance(x, y)


def product_distance(metric: ProductMetric, x: Sequence, y: Sequence) -> float:
    if len(x) != len(y):
        raise MetricError(f"state vectors differ in length: {len(x)} vs {len(y)}")
    if len(x) != metric.dim:
        raise MetricError(f"expected vectors of length {metric.dim}, got {len(x)}")
    return float(sum(metric.base.distance(a, b) for a, b in zip(x, y)))


def metric_from_dict(desc: dict):
    kind = desc.get("kind")
    if kind == "trivial":
        return TrivialMetric()
    if kind in ("classical", "inv_sqrt"):
        return PathMetric(kind)
    if kind == "table":
        if "tail" not in desc:
            raise MetricError("table metric descriptor needs a 'tail' rule")
        return PathMetric.from_table(desc["weights"], tuple(desc["tail"]))
    if kind == "product":
        return ProductMetric(metric_from_dict(desc["base"]), int(desc["dim"]))
    raise MetricError(f"unknown metric kind {kind!r}")


@dataclass(frozen=True)
class Seminorm:
    value: float
    argmax: int
    attained: bool
    tail_limit: float | None = None


def lipschitz_seminorm(
    f: Callable[[np.ndarray], np.ndarray],
    metric: PathMetric,
    scan_limit: int,
    tail_limit: float | None = None,
) -> Seminorm:
    """sup_{x <= scan_limit} |f(x+1) - f(x)| / u_x for a vectorized ``f``.

    ``attained`` is a heuristic: the supremum counts as attained when the
    adjacent ratios settle below their maximum and are nonincreasing over the
    last tenth of the scan.  Otherwise the reported value is the scan maximum
    and ``tail_limit`` (if the caller knows it) is passed through.
    """
    if scan_limit < 1:
        raise MetricError("scan_limit must be positive")
    xs = np.arange(scan_limit + 2)
    fx = np.asarray(f(xs), dtype=float)
    ratios = np.abs(np.diff(fx)) / metric.weights(xs[:-1])
    k = int(np.argmax(ratios))
    top = float(ratios[k])
    tail = ratios[-max(2, len(ratios) // 10):]
    settled = bool(np.all(np.diff(tail) <= 1e-15 * max(top, 1.0)))
    attained = k < len(ratios) - 1 and settled and tail[-1] < top or top == 0.0
    if tail_limit is not None and tail_limit > top:
        attained = False
        top = tail_limit
    return Seminorm(top, k, bool(attained), tail_limit)


def lipschitz_seminorm_finite(f: Callable[[State], float], metric, states: Sequence[State]) -> float:
    """Brute-force sup |f(x) - f(y)| / d(x, y) over a finite state list."""
    vals = [float(f(s)) for s in states]
    best = 0.0
    for i, x in enumerate(states):
        for j in range(i + 1, len(states)):
            d = metric.distance(x, states[j])
            if d > 0:
                best = max(best, abs(vals[i] - vals[j]) / d)
    return best
