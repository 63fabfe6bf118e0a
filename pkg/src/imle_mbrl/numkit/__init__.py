"""Minimal differentiable function-approximation and optimization core."""

from .params import (
    AdamState,
    NonFiniteGradient,
    ParameterSet,
    UsageError,
    adam_step,
    polyak_update,
)
from .layers import (
    EPS_NORM,
    Dense,
    L2Norm,
    Network,
    PassCounter,
    Relu,
    ResidualBlock,
    build_mlp,
    build_residual_net,
    mlp_structure,
    residual_net_structure,
)
from .losses import (
    bound_logvar,
    gaussian_nll_loss_and_grad,
    mse_loss_and_grad,
    per_transition_quantile_loss,
    per_transition_quantile_loss_reference,
    quantile_midpoints,
    sigmoid,
    softplus,
)
from .gradcheck import check_gradients, finite_difference_grad, max_relative_error

__all__ = [
    "AdamState",
    "Dense",
    "EPS_NORM",
    "L2Norm",
    "Network",
    "NonFiniteGradient",
    "ParameterSet",
    "PassCounter",
    "Relu",
    "ResidualBlock",
    "UsageError",
    "adam_step",
    "bound_logvar",
    "build_mlp",
    "build_residual_net",
    "check_gradients",
    "finite_difference_grad",
    "gaussian_nll_loss_and_grad",
    "max_relative_error",
    "mlp_structure",
    "mse_loss_and_grad",
    "per_transition_quantile_loss",
    "per_transition_quantile_loss_reference",
    "polyak_update",
    "quantile_midpoints",
    "residual_net_structure",
    "sigmoid",
    "softplus",
]
