"""Experiment configuration: JSON schema 1 and builders for models,
metrics and observables."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .jump_process import BirthDeathRates, Generator, ModelError, build_product_chain, hypercube
from .metric_space import PathMetric, ProductMetric, TrivialMetric, metric_from_dict

SCHEMA_VERSION = 1
OBSERVABLES = ("identity", "sqrt", "indicator", "table")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: dict
    metric: dict = field(default_factory=lambda: {"kind": "classical"})
    observable: dict = field(default_factory=lambda: {"name": "identity"})
    x0: Any = 0
    t: float = 1.0
    y_grid: list = field(default_factory=lambda: [0.5, 1.0])
    replicas: int = 10_000
    seed: int = 0
    alpha: float = 0.01
    bound: str = "auto"
    truncation: int = 1000
    t_grid: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.5, 1.0])
    tol: float = 1e-12
    workers: int = 1
    transport: dict | None = None
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {self.schema!r}")
        if self.bound not in ("auto", "thm26", "cor47"):
            raise ConfigError(f"unknown bound {self.bound!r}")
        name = self.observable.get("name")
        if name not in OBSERVABLES:
            raise ConfigError(f"unknown observable {name!r}; built-ins are {', '.join(OBSERVABLES)}")
        if isinstance(self.x0, list):
            self.x0 = tuple(self.x0)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "model" not in data:
            raise ConfigError("config needs a 'model'")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["x0"], tuple):
            d["x0"] = list(d["x0"])
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def build_model(desc: dict):
    kind = desc.get("model")
    if kind == "mm_infinity":
        return BirthDeathRates.mm_infinity(desc["lambda"], desc["nu"])
    if kind == "birth_death":
        rates = desc.get("rates", "table")
        if rates == "constant":
            return BirthDeathRates.constant(desc["lambda"], desc["nu"])
        if rates == "table":
            tails = {k: tuple(desc[k]) for k in ("birth_tail", "death_tail") if k in desc}
            return BirthDeathRates.from_tables(desc["birth"], desc["death"], max_state=desc.get("max_state"), **tails)
        raise ConfigError(f"unknown birth_death rates {rates!r}")
    if kind == "hypercube":
        return hypercube(int(desc["N"]))
    if kind == "product":
        comp = build_model(desc["component"])
        n = int(desc["N"])
        chain = build_product_chain(comp, n)
        if n == 1:
            from .jump_process import ProductChain
            chain = ProductChain((comp,), 1)
        return chain
    if kind == "explicit":
        states = desc.get("states")
        if states is not None:
            states = [tuple(s) if isinstance(s, list) else s for s in states]
        return Generator.from_matrix(np.asarray(desc["rates"], dtype=float), states)
    raise ConfigError(f"unknown model {kind!r}")


def build_metric(desc: dict, model=None):
    metric = metric_from_dict(desc)
    # on product models a plain base metric is lifted to the l1 product
    dim = getattr(model, "dim", None)
    if dim is not None and not isinstance(metric, ProductMetric):
        metric = ProductMetric(metric, dim)
    return metric


@dataclass(frozen=True)
class Observable:
    """Named built-in observable.  On product states the built-ins act on the
    coordinate sum, so ``identity`` is the Hamming weight on {0,1}^N."""

    name: str
    params: tuple = ()

    def _scalar(self, x):
        if isinstance(x, tuple):
            x = sum(x)
        return x

    def __call__(self, x) -> float:
        return float(self.vector(np.asarray(self._scalar(x))))

    def vector(self, xs):
        xs = np.asarray(xs)
        if self.name == "identity":
            return xs.astype(float)
        if self.name == "sqrt":
            return np.sqrt(xs.astype(float))
        if self.name == "indicator":
            return np.isin(xs, np.asarray(self.params[0])).astype(float)
        values, tail = np.asarray(self.params[0], dtype=float), self.params[1]
        rule, c = tail
        if rule == "constant":
            ext = np.full(xs.shape, float(c))
        elif rule == "last":
            ext = np.full(xs.shape, values[-1])
        else:
            raise ConfigError(f"unknown observable tail rule {rule!r}")
        return np.where(xs < len(values), values[np.minimum(xs, len(values) - 1)], ext)


def build_observable(desc: dict) -> Observable:
    name = desc.get("name")
    if name in ("identity", "sqrt"):
        return Observable(name)
    if name == "indicator":
        return Observable(name, (tuple(desc["set"]),))
    if name == "table":
        if "tail" not in desc:
            raise ConfigError("table observable needs a tail rule")
        return Observable(name, (tuple(desc["values"]), tuple(desc["tail"])))
    raise ConfigError(f"unknown observable {name!r}")
