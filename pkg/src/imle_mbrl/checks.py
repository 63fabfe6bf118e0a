"""Finite-difference verification batteries for every trainable network.

Each family builds a small random instance, evaluates its training loss
with analytic gradients, and compares against central differences over
all parameters.  Losses with branch points (quantile-Huber kinks, log-std
clamps) resample inputs until every branch sits a safe margin away, so
the comparison never straddles a non-differentiable point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import SacAgent, TanhGaussianPolicy
from .numkit import check_gradients, gaussian_nll_loss_and_grad, mse_loss_and_grad
from .worldmodel import GaussianEnsemble, ImleEnsemble

# branch margin >> finite-difference step, so no perturbation crosses a kink
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    instances: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _child(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(int(rng.integers(2**63)))


def _randomize_heads(net, names, rng: np.random.Generator) -> None:
    # output heads start at zero, which would zero every trunk gradient
    for name in names:
        for part in (".W", ".b"):
            v = net.params.view(name + part)
            v[...] = 0.4 * rng.standard_normal(v.shape)


def _imle_error(rng: np.random.Generator) -> float:
    k = 2
    model = ImleEnsemble(2, 1, k=k, latent_dim=2, hidden=5, blocks=2,
                         rngs=[_child(rng) for _ in range(k)])
    _randomize_heads(model.net, ("reward", "state"), rng)
    x = np.ascontiguousarray(np.broadcast_to(
        rng.standard_normal((3, model.in_dim)), (k, 3, model.in_dim)))
    y = rng.standard_normal((3, model.out_dim))

    def loss_and_grad():
        out = model.net.forward(x)
        pred = np.concatenate([out["reward"], out["state"]], axis=-1)
        loss, grad = mse_loss_and_grad(pred, y)
        g = model.net.params.zeros_like()
        model.net.backward({"reward": grad[..., :1], "state": grad[..., 1:]}, g)
        return float(loss.sum()), g

    return check_gradients(loss_and_grad, model.net.params)


def _gaussian_error(rng: np.random.Generator) -> float:
    k = 2
    model = GaussianEnsemble(2, 1, k=k, hidden=5, blocks=2,
                             rngs=[_child(rng) for _ in range(k)])
    _randomize_heads(model.net, ("mean", "logvar"), rng)
    x = np.ascontiguousarray(np.broadcast_to(
        rng.standard_normal((3, model.in_dim)), (k, 3, model.in_dim)))
    y = rng.standard_normal((3, model.out_dim))

    def loss_and_grad():
        out = model.net.forward(x)
        loss, dmean, draw = gaussian_nll_loss_and_grad(out["mean"],
                                                       out["logvar"], y)
        g = model.net.params.zeros_like()
        model.net.backward({"mean": dmean, "logvar": draw}, g)
        return float(loss.sum()), g

    return check_gradients(loss_and_grad, model.net.params)


def _critic_error(rng: np.random.Generator) -> float:
    agent = SacAgent(2, 1, -1.0, 1.0, hidden=(4, 4), n_quantiles=5,
                     rng=_child(rng))
    states = rng.standard_normal((3, 2))
    actions = rng.uniform(-1.0, 1.0, size=(3, 1))
    weights = rng.uniform(0.2, 1.0, size=3)
    q = agent.critic.quantiles(states, actions)
    for _ in range(200):
        targets = rng.uniform(-2.0, 2.0, size=(3, 5))
        u = np.abs(targets[None, :, None, :] - q[..., None])
        if min(u.min(), np.abs(u - 1.0).min()) > KINK_MARGIN:
            break
    else:
        raise RuntimeError("could not place targets clear of Huber kinks")

    def loss_and_grad():
        return agent.weighted_critic_loss(states, actions, targets, weights)

    return check_gradients(loss_and_grad, agent.critic.online.params)


def _policy_error(rng: np.random.Generator) -> float:
    policy = TanhGaussianPolicy(2, 1, -1.5, 0.7, hidden=(4, 4),
                                rng=_child(rng))
    states = rng.standard_normal((3, 2))
    eps = rng.standard_normal((3, 1))
    c_action = rng.standard_normal((3, 1))
    c_logp = rng.standard_normal(3)

    def loss_and_grad():
        actions, log_probs = policy.sample(states, eps=eps)
        loss = float(np.sum(c_action * actions) + np.dot(c_logp, log_probs))
        g = policy.net.params.zeros_like()
        policy.backward(c_action, c_logp, g)
        return loss, g

    return check_gradients(loss_and_grad, policy.net.params)


FAMILIES = [
    ("world-model-imle", _imle_error),
    ("world-model-gaussian", _gaussian_error),
    ("quantile-critic", _critic_error),
    ("policy", _policy_error),
]


def gradient_battery(instances_per_family: int = 6, tolerance: float = 1e-4,
                     seed: int = 0) -> list[CheckResult]:
    """Run every family; the battery passes iff every result passes."""
    if instances_per_family < 1:
        raise ValueError("need at least one instance per family")
    rng = np.random.default_rng(seed)
    results = []
    for name, family in FAMILIES:
        worst = max(family(rng) for _ in range(instances_per_family))
        results.append(CheckResult(name, instances_per_family, worst, tolerance))
    return results
