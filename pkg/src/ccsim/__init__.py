"""Distribution testing with a confused collector: testers, oracles and experiments."""

from __future__ import annotations

from .domain import (
    Coupling,
    DiscreteDistribution,
    DomainError,
    MetricSpace,
    emd_exact,
    tv_distance,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .oracle import OracleSession

__version__ = "0.1.0"

__all__ = [
    "Coupling",
    "DiscreteDistribution",
    "DomainError",
    "KERNEL_BACKEND",
    "MetricSpace",
    "OracleSession",
    "emd_exact",
    "tv_distance",
]
