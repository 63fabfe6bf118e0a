"""Transition-model ensembles and predictive-uncertainty estimation."""

from .gaussian import GaussianEnsemble
from .imle import (
    ImleEnsemble,
    draw_latents,
    load_model,
    make_targets,
    split_target,
)
from .uncertainty import (
    PredictionBatch,
    UncertaintyReport,
    decompose_uncertainty,
    sigma_from_predictions,
    summarize_predictions,
    weight_from_sigma,
)

__all__ = [
    "GaussianEnsemble",
    "ImleEnsemble",
    "PredictionBatch",
    "UncertaintyReport",
    "decompose_uncertainty",
    "draw_latents",
    "load_model",
    "make_targets",
    "sigma_from_predictions",
    "split_target",
    "summarize_predictions",
    "weight_from_sigma",
]
