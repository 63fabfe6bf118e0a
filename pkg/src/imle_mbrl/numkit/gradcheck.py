"""Central finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParameterSet


def finite_difference_grad(loss_fn: Callable[[], float], params: ParameterSet,
                           h: float = 1e-5) -> np.ndarray:
    """Central differences of loss_fn with respect to every parameter.

    Perturbs the flat buffer in place and restores it; loss_fn must be a
    deterministic closure over `params`.
    """
    flat = params.flat.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(params.flat.shape)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative disagreement between two gradients."""
    diff = float(np.max(np.abs(analytic - numeric)))
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-8)
    return diff / scale


def check_gradients(loss_and_grad: Callable[[], tuple[float, ParameterSet]],
                    params: ParameterSet, h: float = 1e-5) -> float:
    """Compare analytic gradients against central differences.

    loss_and_grad() must return (loss value, gradient ParameterSet) for the
    current parameters.  Returns the max relative error.
    """
    _, grads = loss_and_grad()
    analytic = grads.flat.copy()

    def value_only() -> float:
        loss, _ = loss_and_grad()
        return loss

    numeric = finite_difference_grad(value_only, params, h)
    return max_relative_error(analytic, numeric)
