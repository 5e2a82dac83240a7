"""Wasserstein curvature and Poisson-type deviation bounds for Markov jump processes."""

from .bounds import BoundParams, bound_cor47, bound_thm26, g, h
from .curvature import birth_death_curvature, estimate_curvature_numeric
from .jump_process import BirthDeathRates, Generator, hypercube
from .metric_space import PathMetric, ProductMetric, TrivialMetric

__version__ = "0.1.0"
