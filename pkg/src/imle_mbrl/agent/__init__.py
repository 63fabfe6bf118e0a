"""Soft actor-critic with quantile critics and confidence-weighted TD loss."""

from .critic import QuantileCritic
from .policy import LOG_STD_MAX, LOG_STD_MIN, TanhGaussianPolicy
from .sac import SacAgent

__all__ = [
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "QuantileCritic",
    "SacAgent",
    "TanhGaussianPolicy",
]
