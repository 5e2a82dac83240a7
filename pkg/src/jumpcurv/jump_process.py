"""Markov jump process models and their semigroups.

Every model exposes ``jumps(x) -> [(target, rate), ...]`` and a ``states``
attribute (a tuple for finite chains, ``None`` for chains on all of N).
Transition probabilities are computed by uniformization on a finite
truncation, with the mass that escapes the truncation reported per row.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

State = Any


class ModelError(ValueError):
    pass


class NonErgodicError(ModelError):
    pass


class TruncationError(RuntimeError):
    def __init__(self, message: str, leaked: float, suggested_size: int):
        super().__init__(message)
        self.leaked = leaked
        self.suggested_size = suggested_size


def _check_jumps(x, out):
    for y, r in out:
        if y == x:
            raise ModelError(f"self-loop at state {x!r}")
        if not (r > 0 and math.isfinite(r)):
            raise ModelError(f"rate {r!r} from {x!r} to {y!r} must be positive and finite")
    return out


@dataclass(frozen=True)
class Generator:
    """Finite-support jump rates given explicitly per state."""

    rates: dict
    states: tuple | None = None
    name: str = "explicit"

    def __post_init__(self):
        for x, out in self.rates.items():
            _check_jumps(x, out)
        if self.states is None:
            object.__setattr__(self, "states", tuple(self.rates))

    @classmethod
    def from_matrix(cls, Q, states: Sequence[State] | None = None, name: str = "explicit") -> "Generator":
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        states = tuple(range(n)) if states is None else tuple(states)
        rates = {}
        for i in range(n):
            rates[states[i]] = tuple((states[j], float(Q[i, j])) for j in range(n) if j != i and Q[i, j] > 0)
            if np.any(np.delete(Q[i], i) < 0):
                raise ModelError(f"negative off-diagonal rate in row {i}")
        return cls(rates, states, name)

    def jumps(self, x: State):
        return self.rates.get(x, ())

    def total_rate(self, x: State) -> float:
        return float(sum(r for _, r in self.jumps(x)))


@dataclass(frozen=True)
class BirthDeathRates:
    """Birth rates lambda_x and death rates nu_x on N (or on {0..max_state}).

    ``kind`` tags closed forms: ``mm_infinity`` (lambda_x = lam, nu_x = nu*x),
    ``constant`` (lambda_x = lam, nu_x = nu for x >= 1).  ``table`` rates are
    given as finite tables extended by a tail rule ``("constant", c)`` or
    ``("linear", a)`` meaning ``a * x``.
    """

    kind: str
    lam: float = 0.0
    nu: float = 0.0
    birth_table: tuple[float, ...] = ()
    death_table: tuple[float, ...] = ()
    birth_tail: tuple[str, float] | None = None
    death_tail: tuple[str, float] | None = None
    max_state: int | None = None

    def __post_init__(self):
        if self.kind in ("mm_infinity", "constant"):
            if not (self.lam > 0 and self.nu > 0):
                raise ModelError("rates must be positive")
        elif self.kind == "table":
            if self.max_state is None and (self.birth_tail is None or self.death_tail is None):
                raise ModelError("infinite table rates need tail rules")
            if self.death_table and self.death_table[0] != 0:
                raise ModelError("nu_0 must be 0")
            top = self.max_state if self.max_state is not None else max(len(self.birth_table), len(self.death_table)) + 1
            xs = np.arange(top + 1)
            lam, nu = self.birth(xs), self.death(xs)
            if self.max_state is not None:
                lam = lam[:-1]
            if np.any(lam <= 0) or np.any(nu[1:] <= 0):
                raise ModelError("birth rates and death rates (x >= 1) must be positive")
        else:
            raise ModelError(f"unknown rate kind {self.kind!r}")

    @classmethod
    def mm_infinity(cls, lam: float, nu: float) -> "BirthDeathRates":
        return cls("mm_infinity", float(lam), float(nu))

    @classmethod
    def constant(cls, lam: float, nu: float) -> "BirthDeathRates":
        return cls("constant", float(lam), float(nu))

    @classmethod
    def from_tables(cls, birth, death, birth_tail=None, death_tail=None, max_state=None) -> "BirthDeathRates":
        death = list(death)
        if not death or death[0] != 0:
            death = [0.0] + death
        return cls(
            "table",
            birth_table=tuple(float(v) for v in birth),
            death_table=tuple(float(v) for v in death),
            birth_tail=None if birth_tail is None else (birth_tail[0], float(birth_tail[1])),
            death_tail=None if death_tail is None else (death_tail[0], float(death_tail[1])),
            max_state=max_state,
        )

    @classmethod
    def two_state(cls, up: float, down: float) -> "BirthDeathRates":
        return cls.from_tables([up], [0.0, down], max_state=1)

    @staticmethod
    def _lookup(table, tail, x):
        table = np.asarray(table, dtype=float)
        if tail is None:
            ext = np.zeros(x.shape)
        elif tail[0] == "constant":
            ext = np.full(x.shape, tail[1])
        elif tail[0] == "linear":
            ext = tail[1] * x
        else:
            raise ModelError(f"unknown tail rule {tail!r}")
        if len(table) == 0:
            return ext.astype(float)
        return np.where(x < len(table), table[np.minimum(x, len(table) - 1)], ext)

    def birth(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if self.kind == "table":
            out = self._lookup(self.birth_table, self.birth_tail, x)
        else:
            out = np.full(x.shape, self.lam)
        if self.max_state is not None:
            out = np.where(x >= self.max_state, 0.0, out)
        return np.where(x < 0, 0.0, out)

    def death(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if self.kind == "mm_infinity":
            out = self.nu * x.astype(float)
        elif self.kind == "constant":
            out = np.full(x.shape, self.nu)
        else:
            out = self._lookup(self.death_table, self.death_tail, x)
        if self.max_state is not None:
            out = np.where(x > self.max_state, 0.0, out)
        return np.where(x <= 0, 0.0, out)

    @property
    def states(self):
        return None if self.max_state is None else tuple(range(self.max_state + 1))

    @property
    def xi(self) -> float:
        return self.lam / self.nu

    def jumps(self, x: int):
        out = []
        # scalar fast path; the simulator calls this once per jump
        if self.kind == "mm_infinity":
            lam, nu = self.lam, self.nu * x
        elif self.kind == "constant":
            lam, nu = self.lam, (self.nu if x > 0 else 0.0)
        else:
            lam, nu = float(self.birth(x)), float(self.death(x))
        if lam > 0:
            out.append((x + 1, lam))
        if nu > 0:
            out.append((x - 1, nu))
        return out

    def total_rate(self, x: int) -> float:
        return float(self.birth(x) + self.death(x))

    def truncate(self, top: int) -> "BirthDeathRates":
        """Same rates on {0..top}, with the birth at ``top`` removed."""
        xs = np.arange(top + 1)
        return BirthDeathRates.from_tables(self.birth(xs[:-1]), self.death(xs), max_state=top)

    def to_dict(self) -> dict:
        if self.kind == "mm_infinity":
            return {"model": "mm_infinity", "lambda": self.lam, "nu": self.nu}
        if self.kind == "constant":
            return {"model": "birth_death", "rates": "constant", "lambda": self.lam, "nu": self.nu}
        d = {"model": "birth_death", "rates": "table",
             "birth": list(self.birth_table), "death": list(self.death_table)}
        if self.birth_tail:
            d["birth_tail"] = list(self.birth_tail)
        if self.death_tail:
            d["death_tail"] = list(self.death_tail)
        if self.max_state is not None:
            d["max_state"] = self.max_state
        return d


@dataclass(frozen=True)
class ProductChain:
    """N coordinates; a coordinate is picked uniformly and moves by its own
    dynamics, so each coordinate move fires at 1/N of its component rate."""

    components: tuple
    dim: int

    def __post_init__(self):
        if self.dim < 1 or len(self.components) != self.dim:
            raise ModelError("need one component per coordinate")
        for c in self.components:
            if c.states is None:
                raise ModelError("product components must have finite state spaces")
        # the state space is finite, so jump lists are memoized per state
        object.__setattr__(self, "_jump_cache", {})

    @property
    def states(self):
        return tuple(itertools.product(*(c.states for c in self.components)))

    def jumps(self, x):
        out = self._jump_cache.get(x)
        if out is None:
            out = []
            for i, comp in enumerate(self.components):
                for b, r in comp.jumps(x[i]):
                    out.append((x[:i] + (b,) + x[i + 1:], r / self.dim))
            out = self._jump_cache[x] = tuple(out)
        return out

    def total_rate(self, x) -> float:
        return float(sum(r for _, r in self.jumps(x)))


def build_product_chain(components, N: int):
    """Product chain from one shared component or a list of N components."""
    if N < 1:
        raise ModelError("N must be at least 1")
    if not isinstance(components, (list, tuple)):
        components = [components] * N
    if len(components) == 1 and N > 1:
        components = list(components) * N
    components = tuple(components)
    if N == 1:
        return components[0]
    spaces = {c.states for c in components}
    if len(spaces) != 1:
        raise ModelError("components must share a state space")
    return ProductChain(components, N)


def hypercube(N: int):
    """Symmetric random walk on {0,1}^N built from rate-1/2 flip chains."""
    flip = BirthDeathRates.two_state(0.5, 0.5)
    chain = build_product_chain(flip, N)
    return chain if N > 1 else ProductChain((flip,), 1)


def hypercube_kernel(N: int, t: float, x: Sequence[int], y: Sequence[int]) -> float:
    e = math.exp(-t / N)
    p = 1.0
    for a, b in zip(x, y):
        p *= (1.0 + (-1) ** abs(a - b) * e) / 2.0
    return p


# -- birth-death stationary measures -----------------------------------------

@dataclass(frozen=True)
class StationaryMeasure:
    probs: np.ndarray
    log_normalizer: float
    tail_mass: float

    @property
    def truncation(self) -> int:
        return len(self.probs) - 1

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    def expect(self, f) -> float:
        return float(np.dot(self.probs, f(np.arange(len(self.probs)))))


def log_mu(rates: BirthDeathRates, top: int) -> np.ndarray:
    """log mu(x) for x = 0..top, mu(x) = lambda_0..lambda_{x-1} / nu_1..nu_x."""
    xs = np.arange(top)
    steps = np.log(rates.birth(xs)) - np.log(rates.death(xs + 1))
    return np.concatenate(([0.0], np.cumsum(steps)))


def stationary_measure(
    rates: BirthDeathRates,
    tol: float = 1e-14,
    max_states: int = 1_000_000,
    check: bool = True,
) -> StationaryMeasure:
    """Normalized stationary law of a birth-death chain, truncated where the
    remaining mass is below ``tol`` (geometric tail estimate)."""
    if check:
        verdict = check_ergodicity(rates)
        if verdict.verdict != "ergodic":
            raise NonErgodicError(f"chain looks {verdict.verdict}: {verdict.note}")
    if rates.max_state is not None:
        lm = log_mu(rates, rates.max_state)
        lc = float(logsumexp(lm))
        return StationaryMeasure(np.exp(lm - lc), lc, 0.0)
    top = 64
    while True:
        lm = log_mu(rates, top)
        lc = float(logsumexp(lm))
        # ratio of consecutive mu's at the end of the scan
        r = math.exp(lm[-1] - lm[-2])
        if r < 1:
            log_tail = lm[-1] + math.log(r) - math.log1p(-r)
            if log_tail < math.log(tol) + lc:
                probs = np.exp(lm - lc)
                last = np.flatnonzero(probs > tol * 1e-3)
                cut = int(last[-1]) + 1 if len(last) else len(probs)
                # trailing mass dropped by the cut plus the geometric tail
                dropped = float(probs[cut:].sum()) + math.exp(log_tail - lc)
                probs = probs[:cut] / (1.0 - float(probs[cut:].sum()))
                return StationaryMeasure(probs, lc, dropped)
        if lc > 700 and r >= 1:
            raise NonErgodicError("normalizer diverges: mu does not decay")
        if top >= max_states:
            raise NonErgodicError(f"mu tail not below tol within {max_states} states")
        top *= 2


@dataclass(frozen=True)
class ErgodicityVerdict:
    verdict: str
    log_C_partial: tuple[float, float]
    log_D_partial: tuple[float, float]
    note: str = "numerical heuristic; divergence of a series cannot be certified"


def check_ergodicity(rates: BirthDeathRates, horizon: int = 2000, tol: float = 1e-10) -> ErgodicityVerdict:
    """Heuristic test of C = sum mu(x) < inf and
    sum_x mu(x) sum_{y >= x} 1 / (mu(y) lambda_y) = inf.

    Partial sums at horizon/2 and horizon are returned in log space.
    """
    if horizon < 10:
        raise ModelError("horizon must be at least 10")
    if rates.max_state is not None:
        lm = log_mu(rates, rates.max_state)
        lc = float(logsumexp(lm))
        return ErgodicityVerdict("ergodic", (lc, lc), (math.inf, math.inf), "finite irreducible chain")
    lm = log_mu(rates, horizon)
    half = horizon // 2
    lc_half, lc_full = float(logsumexp(lm[: half + 1])), float(logsumexp(lm))
    # D_H = sum_{y<=H} S_y / (mu(y) lambda_y) with S_y = sum_{x<=y} mu(x)
    log_s = np.logaddexp.accumulate(lm)
    terms = log_s - lm - np.log(rates.birth(np.arange(horizon + 1)))
    ld_half, ld_full = float(logsumexp(terms[: half + 1])), float(logsumexp(terms))
    c_converged = lc_full - lc_half < tol and lm[-1] < lm[half]
    d_grows = ld_full - ld_half > math.log(1.5) or ld_full > math.log(1.0 / tol)
    if not c_converged:
        verdict = "transient-suspect"
    elif d_grows:
        verdict = "ergodic"
    else:
        verdict = "explosive-suspect"
    return ErgodicityVerdict(verdict, (lc_half, lc_full), (ld_half, ld_full))


def stationary_distribution(gen, states: Sequence[State] | None = None) -> np.ndarray:
    """Stationary law of a finite irreducible chain by a direct linear solve."""
    states = tuple(gen.states if states is None else states)
    Q, _ = rate_matrix(gen, states)
    n = len(states)
    A = np.vstack([Q.T, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return pi


# -- semigroup by uniformization ----------------------------------------------

def rate_matrix(gen, states: Sequence[State]) -> tuple[np.ndarray, np.ndarray]:
    """Generator restricted to ``states`` and the per-state rate of leaving it."""
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    Q = np.zeros((n, n))
    leak = np.zeros(n)
    for i, x in enumerate(states):
        for y, r in gen.jumps(x):
            j = index.get(y)
            if j is None:
                leak[i] += r
            else:
                Q[i, j] += r
            Q[i, i] -= r
    return Q, leak


@dataclass(frozen=True)
class SemigroupRows:
    rows: np.ndarray
    truncation: tuple
    leaked: np.ndarray
    rate: float
    terms: int


def semigroup_rows(
    gen,
    t: float,
    states: Sequence[State] | None = None,
    truncation: Sequence[State] | None = None,
    tol: float = 1e-12,
) -> SemigroupRows:
    """Rows P_t(x, .) for x in ``states``, restricted to ``truncation``.

    The Poisson mixture is cut where its tail drops below tol/2; the rest of
    the budget goes to mass escaping the truncation, which is checked.
    """
    if truncation is None:
        if gen.states is None:
            raise ModelError("infinite chain needs an explicit truncation")
        truncation = gen.states
    truncation = tuple(truncation)
    states = truncation if states is None else tuple(states)
    index = {s: i for i, s in enumerate(truncation)}
    Q, leak = rate_matrix(gen, truncation)
    n = len(truncation)
    start = np.zeros((len(states), n))
    for k, s in enumerate(states):
        if s not in index:
            raise ModelError(f"start state {s!r} outside truncation")
        start[k, index[s]] = 1.0
    rate = float(np.max(-np.diag(Q))) if n else 0.0
    if t < 0:
        raise ModelError("t must be nonnegative")
    if t == 0 or rate == 0:
        return SemigroupRows(start, truncation, np.zeros(len(states)), rate, 1)
    P = np.eye(n) + Q / rate
    mean = rate * t
    kmax = int(stats.poisson.isf(tol / 2, mean)) + 1
    weights = stats.poisson.pmf(np.arange(kmax + 1), mean)
    v = start
    acc = weights[0] * v
    for k in range(1, kmax + 1):
        v = v @ P
        acc += weights[k] * v
    leaked = np.clip(1.0 - acc.sum(axis=1), 0.0, None)
    worst = float(leaked.max())
    if worst > tol:
        raise TruncationError(
            f"truncation of {n} states leaks {worst:.3g} > tol {tol:.3g}",
            worst,
            2 * n,
        )
    return SemigroupRows(acc, truncation, leaked, rate, kmax + 1)


def transition_matrix(gen, t: float, truncation=None, tol: float = 1e-12) -> np.ndarray:
    return semigroup_rows(gen, t, None, truncation, tol).rows
