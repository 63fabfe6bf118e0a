"""Predictive-uncertainty statistics over an ensemble's sample sets.

All statistics use population (divide-by-N) variances so the law of total
variance holds exactly: per output dimension, the variance over all K*m
samples equals the variance of per-member means (epistemic) plus the mean
of per-member variances (aleatoric).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UncertaintyReport:
    """Scalar uncertainty summary for one (state, action) query.

    sigma is the mean over output dimensions of the per-dimension standard
    deviation across all ensemble samples; epistemic and aleatoric are the
    dimension-averaged variance components, which sum to the
    dimension-averaged total variance exactly.
    """

    sigma: float
    epistemic: float
    aleatoric: float

    def __post_init__(self):
        if self.sigma < 0.0 or self.epistemic < 0.0 or self.aleatoric < 0.0:
            raise ValueError("uncertainty components must be nonnegative")


def sigma_from_predictions(preds: np.ndarray) -> np.ndarray:
    """Mean over output dims of the population std across all K*m samples.

    preds: (K, m, ..., D); returns shape (...).
    """
    k, m = preds.shape[0], preds.shape[1]
    pooled = preds.reshape((k * m,) + preds.shape[2:])
    return np.sqrt(pooled.var(axis=0)).mean(axis=-1)


def weight_from_sigma(sigma: np.ndarray | float):
    """Confidence weight w = 1/(sigma+1), in (0, 1] for finite sigma >= 0."""
    return 1.0 / (np.asarray(sigma) + 1.0)


def decompose_uncertainty(preds: np.ndarray):
    """Split sample variance into across-member and within-member parts.

    preds: (K, m, ..., D) with K >= 2 members and m >= 2 samples each.
    Returns (epistemic, aleatoric), each of shape (...): per-dimension
    variances averaged over output dimensions.
    """
    if preds.ndim < 3:
        raise ValueError("expected predictions shaped (members, samples, ..., dims)")
    if preds.shape[0] < 2 or preds.shape[1] < 2:
        raise ValueError("need K >= 2 members and m >= 2 samples per member "
                         "for a defined variance split")
    member_means = preds.mean(axis=1)
    member_vars = preds.var(axis=1)
    epistemic = member_means.var(axis=0).mean(axis=-1)
    aleatoric = member_vars.mean(axis=0).mean(axis=-1)
    return epistemic, aleatoric


@dataclass(frozen=True)
class PredictionBatch:
    """Vectorized model predictions plus uncertainty for B queries."""

    next_state: np.ndarray  # (B, state_dim)
    reward: np.ndarray      # (B,)
    sigma: np.ndarray       # (B,)
    weight: np.ndarray      # (B,)
    epistemic: np.ndarray   # (B,)
    aleatoric: np.ndarray   # (B,)


def summarize_predictions(preds: np.ndarray,
                          rng: np.random.Generator) -> PredictionBatch:
    """Uncertainty statistics plus one uniformly selected sample per query.

    preds: (K, m, B, 1 + state_dim) with reward in the leading output slot.
    The emitted transition and the uncertainty come from the same sample set.
    """
    k, m, b, _ = preds.shape
    sigma = sigma_from_predictions(preds)
    weight = weight_from_sigma(sigma)
    # inline variance split: degenerate K=1 or m=1 is fine here (the strict
    # preconditions live on the public decompose op)
    epistemic = preds.mean(axis=1).var(axis=0).mean(axis=-1)
    aleatoric = preds.var(axis=1).mean(axis=0).mean(axis=-1)
    flat = preds.reshape(k * m, b, -1)
    pick = rng.integers(k * m, size=b)
    chosen = flat[pick, np.arange(b)]
    return PredictionBatch(next_state=chosen[:, 1:], reward=chosen[:, 0],
                           sigma=sigma, weight=weight,
                           epistemic=epistemic, aleatoric=aleatoric)
