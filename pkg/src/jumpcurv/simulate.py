"""Exact path simulation and Monte Carlo checks of the deviation bounds.

Replica ``i`` of a run with seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(0, i)))``; bootstrap resampling uses
``spawn_key=(1, 0)``.  SeedSequence hashing is specified bit-exactly by
numpy, so every replica owns an independent, reproducible stream and the
worker count never changes a result.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

State = Any

MAX_JUMPS = 10_000_000
_BLOCK = 256


class ExplosionSuspect(RuntimeError):
    pass


def replica_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, index))))


@dataclass(frozen=True)
class PathRecord:
    x0: State
    times: np.ndarray
    states: tuple
    horizon: float

    @property
    def final_state(self):
        return self.states[-1] if self.states else self.x0

    def state_at(self, s: float):
        k = int(np.searchsorted(self.times, s, side="right"))
        return self.x0 if k == 0 else self.states[k - 1]

    def csv_rows(self):
        yield 0.0, self.x0
        for t, x in zip(self.times, self.states):
            yield float(t), x


def _simulate(gen, x0, t, rng, max_jumps):
    times, states = [], []
    x, s = x0, 0.0
    buf, pos = rng.random(_BLOCK).tolist(), 0
    log = math.log
    while True:
        out = gen.jumps(x)
        if not out:
            break
        total = 0.0
        for _, r in out:
            total += r
        if pos >= _BLOCK:
            buf, pos = rng.random(_BLOCK).tolist(), 0
        s -= log(1.0 - buf[pos]) / total
        if s > t:
            break
        v = buf[pos + 1] * total
        pos += 2
        y = out[-1][0]
        for target, r in out:
            v -= r
            if v < 0:
                y = target
                break
        x = y
        times.append(s)
        states.append(x)
        if len(times) > max_jumps:
            raise ExplosionSuspect(f"more than {max_jumps} jumps before time {t}")
    return times, states


def simulate_path(gen, x0, t: float, seed: int | np.random.Generator = 0, max_jumps: int = MAX_JUMPS) -> PathRecord:
    """Jump chain with exponential holding times of rate Q(x, X)."""
    rng = seed if isinstance(seed, np.random.Generator) else replica_rng(int(seed), 0)
    times, states = _simulate(gen, x0, t, rng, max_jumps)
    return PathRecord(x0, np.asarray(times, dtype=float), tuple(states), float(t))


def empirical_mean(path: PathRecord, phi: Callable[[State], float]) -> float:
    """(1/t) * integral_0^t phi(X_s) ds, exact for the piecewise-constant path."""
    edges = np.concatenate(([0.0], path.times, [path.horizon]))
    values = np.array([phi(path.x0)] + [phi(x) for x in path.states], dtype=float)
    return float(np.dot(np.diff(edges), values) / path.horizon)


def riemann_mean(path: PathRecord, phi: Callable[[State], float], n: int) -> float:
    """n^{-1} sum_k phi(X_{k t / n}), k = 1..n."""
    grid = path.horizon * np.arange(1, n + 1) / n
    idx = np.searchsorted(path.times, grid, side="right")
    seq = (path.x0,) + path.states
    vals = np.array([phi(x) for x in seq], dtype=float)
    return float(vals[idx].mean())


# -- replica batches -----------------------------------------------------------

@dataclass(frozen=True)
class _Job:
    gen: Any
    x0: State
    t: float
    seed: int
    phi: Callable | None
    max_jumps: int


def _batch(job: _Job, start: int, stop: int):
    means = np.empty(stop - start)
    finals = []
    cache: dict = {}

    def value(x):
        v = cache.get(x)
        if v is None:
            v = cache[x] = float(job.phi(x))
        return v

    for k, i in enumerate(range(start, stop)):
        rng = replica_rng(job.seed, i)
        times, states = _simulate(job.gen, job.x0, job.t, rng, job.max_jumps)
        finals.append(states[-1] if states else job.x0)
        if job.phi is not None:
            acc, prev_t, prev_x = 0.0, 0.0, job.x0
            for s, x in zip(times, states):
                acc += (s - prev_t) * value(prev_x)
                prev_t, prev_x = s, x
            acc += (job.t - prev_t) * value(prev_x)
            means[k] = acc / job.t
    return means, finals


_ACTIVE_JOB: _Job | None = None


def _batch_from_global(bounds):
    return _batch(_ACTIVE_JOB, *bounds)


def run_replicas(gen, x0, t: float, R: int, seed: int, phi=None, workers: int = 1,
                 max_jumps: int = MAX_JUMPS) -> tuple[np.ndarray, list]:
    """Per-replica empirical means (if ``phi`` given) and final states, in
    replica order regardless of ``workers``."""
    global _ACTIVE_JOB
    job = _Job(gen, x0, float(t), int(seed), phi, max_jumps)
    if workers <= 1:
        return _batch(job, 0, R)
    chunk = max(1, math.ceil(R / (4 * workers)))
    spans = [(a, min(R, a + chunk)) for a in range(0, R, chunk)]
    # workers inherit the job through fork, so lambdas need not pickle
    _ACTIVE_JOB = job
    try:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(workers, mp_context=ctx) as pool:
            parts = list(pool.map(_batch_from_global, spans))
    finally:
        _ACTIVE_JOB = None
    means = np.concatenate([p[0] for p in parts])
    finals = [x for p in parts for x in p[1]]
    return means, finals


# -- tail estimates ------------------------------------------------------------

def clopper_pearson_upper(k, n: int, alpha: float):
    """Exact one-sided upper confidence bound at level 1 - alpha."""
    k = np.asarray(k)
    upper = np.where(k >= n, 1.0, stats.beta.ppf(1 - alpha, k + 1, np.maximum(n - k, 1)))
    return upper


@dataclass(frozen=True)
class TailEstimate:
    y: np.ndarray
    counts: np.ndarray
    replicas: int
    estimate: np.ndarray
    upper: np.ndarray
    alpha: float
    seed: int
    bias: float = 0.0

    def to_dict(self) -> dict:
        return {
            "y": [float(v) for v in self.y],
            "counts": [int(c) for c in self.counts],
            "replicas": self.replicas,
            "estimate": [float(v) for v in self.estimate],
            "upper": [float(v) for v in self.upper],
            "alpha": self.alpha,
            "seed": self.seed,
            "bias": self.bias,
        }


def tail_from_deviations(dev: np.ndarray, y_grid, alpha: float, seed: int, bias: float = 0.0) -> TailEstimate:
    y = np.asarray(y_grid, dtype=float)
    R = len(dev)
    counts = np.array([int(np.count_nonzero(dev >= v + bias)) for v in y])
    return TailEstimate(y, counts, R, counts / R, clopper_pearson_upper(counts, R, alpha), alpha, seed, bias)


def estimate_tail(gen, phi, pi_phi: float, x0, t: float, y_grid, R: int, alpha: float = 0.01,
                  seed: int = 0, bias: float = 0.0, workers: int = 1) -> TailEstimate:
    """Frequencies of |empirical mean - pi(phi)| >= y + bias over R replicas."""
    if R < 100:
        raise ValueError("need at least 100 replicas")
    means, _ = run_replicas(gen, x0, t, R, seed, phi, workers)
    return tail_from_deviations(np.abs(means - pi_phi), y_grid, alpha, seed, bias)


@dataclass(frozen=True)
class LaplaceEstimate:
    tau: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rejected: tuple
    mean: float
    level: float


def empirical_laplace(gen, f, x0, t: float, tau_grid, R: int, seed: int = 0, n_boot: int = 1000,
                      level: float = 0.99, workers: int = 1, values: np.ndarray | None = None) -> LaplaceEstimate:
    """Sample mean of exp(tau (f(X_t) - mean)) with the plug-in mean from the
    same replicas, and one-sided bootstrap percentile bounds at ``level``."""
    if values is None:
        _, finals = run_replicas(gen, x0, t, R, seed, None, workers)
        values = np.array([f(x) for x in finals], dtype=float)
    R = len(values)
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus <= 0):
        raise ValueError("tau values must be positive")
    m = float(values.mean())
    spread = float(np.max(np.abs(values - m))) if R else 0.0
    ok = taus * max(spread, 1e-300) < 700
    rejected = tuple(float(v) for v in taus[~ok])
    taus_ok = taus[ok]
    est = np.array([np.mean(np.exp(tau * (values - m))) for tau in taus_ok])
    uniq, counts = np.unique(values, return_counts=True)
    rng = replica_rng(seed, 0, stream=1)
    boot = np.empty((n_boot, len(taus_ok)))
    step = max(1, min(n_boot, 2_000_000 // max(len(uniq), 1)))
    for a in range(0, n_boot, step):
        b = min(n_boot, a + step)
        cb = rng.multinomial(R, counts / R, size=b - a)
        mb = cb @ uniq / R
        for j, tau in enumerate(taus_ok):
            boot[a:b, j] = (cb @ np.exp(tau * (uniq - m))) / R * np.exp(-tau * (mb - m))
    q = 1 - level
    return LaplaceEstimate(taus_ok, est, np.quantile(boot, q, axis=0), np.quantile(boot, 1 - q, axis=0),
                           rejected, m, level)


# -- M/M/infinity exact law ----------------------------------------------------

def mminf_exact_law(x0: int, t: float, lam: float, nu: float, support_cap: int) -> tuple[np.ndarray, float]:
    """Binomial(x0, e^{-nu t}) * Poisson(xi (1 - e^{-nu t})) on {0..support_cap}
    and the mass beyond the cap."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = math.exp(-nu * t)
    rate = lam / nu * -math.expm1(-nu * t)
    ks = np.arange(support_cap + 1)
    binom = stats.binom.pmf(ks[: x0 + 1], x0, p)
    pois = stats.poisson.pmf(ks, rate) if rate > 0 else (ks == 0).astype(float)
    law = np.convolve(binom, pois)[: support_cap + 1]
    return law, max(0.0, 1.0 - float(law.sum()))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    n = max(len(p), len(q))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(p)] = p
    b[: len(q)] = q
    return 0.5 * float(np.abs(a - b).sum())


def empirical_law(finals: Sequence[int], size: int) -> np.ndarray:
    arr = np.asarray(finals, dtype=np.int64)
    return np.bincount(arr, minlength=size) / len(arr)
