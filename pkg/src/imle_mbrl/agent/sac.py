"""Soft actor-critic over quantile critics with confidence-weighted TD loss.

Synthetic transitions arrive with a confidence weight w in (0, 1]; each
transition's quantile-Huber loss is multiplied by its weight before batch
averaging, so doubtful model rollouts pull on the critic less.  Real data
always carries w = 1, which reduces every formula here to plain SAC: the
weighted path IS the unweighted path with neutral weights, there is no
separate branch.  Actor and temperature objectives are unweighted unless
weight_actor is set (ablation knob).
"""

from __future__ import annotations

import numpy as np

from ..numkit import (
    AdamState,
    ParameterSet,
    adam_step,
    per_transition_quantile_loss,
)
from .critic import QuantileCritic
from .policy import TanhGaussianPolicy


class SacAgent:
    """Uncertainty-weighted soft actor-critic."""

    def __init__(self, state_dim: int, action_dim: int,
                 action_low, action_high, *,
                 hidden: tuple[int, ...] = (64, 64), n_quantiles: int = 100,
                 gamma: float = 0.99, polyak_tau: float = 0.005,
                 actor_lr: float = 3e-4, critic_lr: float = 3e-4,
                 alpha_lr: float = 3e-4, init_alpha: float = 1.0,
                 weight_actor: bool = False,
                 rng: np.random.Generator | None = None, seed: int = 0):
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"discount must be in (0, 1), got {gamma}")
        if init_alpha <= 0.0:
            raise ValueError("initial temperature must be positive")
        if rng is None:
            rng = np.random.default_rng(seed)
        self._rng = rng
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.gamma = float(gamma)
        self.weight_actor = bool(weight_actor)
        self.target_entropy = -float(action_dim)
        self.policy = TanhGaussianPolicy(state_dim, action_dim,
                                         action_low, action_high,
                                         hidden=hidden, lr=actor_lr, rng=rng)
        self.critic = QuantileCritic(state_dim, action_dim,
                                     n_quantiles=n_quantiles, hidden=hidden,
                                     lr=critic_lr, polyak_tau=polyak_tau,
                                     rng=rng)
        self._alpha_params = ParameterSet()
        self._alpha_params.declare("log_alpha", (1,))
        self._alpha_params.freeze()
        self._alpha_params.view("log_alpha")[...] = np.log(init_alpha)
        self._alpha_opt = AdamState(self._alpha_params, alpha_lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self._alpha_params.view("log_alpha")[0]))

    def select_action(self, state: np.ndarray, deterministic: bool = False,
                      rng: np.random.Generator | None = None) -> np.ndarray:
        """Action for one state: squashed mean, or a fresh stochastic draw."""
        states = np.asarray(state, dtype=np.float64)[None, :]
        return self.policy.act(states, rng if rng is not None else self._rng,
                               deterministic)[0]

    def select_actions(self, states: np.ndarray, deterministic: bool = False,
                       rng: np.random.Generator | None = None) -> np.ndarray:
        """Batched action selection (rollout generation)."""
        return self.policy.act(states, rng if rng is not None else self._rng,
                               deterministic)

    @staticmethod
    def _check_weights(weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=np.float64)
        if w.size == 0 or np.any(w <= 0.0) or np.any(w > 1.0):
            raise ValueError("transition weights must lie in (0, 1]")
        return w

    def critic_targets(self, rewards: np.ndarray, next_states: np.ndarray,
                       dones: np.ndarray,
                       rng: np.random.Generator | None = None) -> np.ndarray:
        """Target quantile atoms r + gamma * (min target Q' - alpha * log pi').

        Terminal transitions keep only the reward.  Gradient-free.
        """
        next_actions, next_lp = self.policy.sample(
            next_states, rng if rng is not None else self._rng)
        tq = self.critic.target_quantiles(next_states, next_actions)
        min_q, _ = QuantileCritic.min_pair(tq)
        soft = min_q - self.alpha * next_lp[:, None]
        keep = 1.0 - np.asarray(dones, dtype=np.float64)
        return np.asarray(rewards)[:, None] + self.gamma * keep[:, None] * soft

    def weighted_critic_loss(self, states, actions, targets, weights):
        """Confidence-weighted quantile-Huber TD loss and its gradients.

        Returns (scalar loss, parameter gradients); does not step.  The
        loss is sum_i w_i * (rho_1_i + rho_2_i) / batch, linear in the
        weights, and with all-ones weights it is exactly the unweighted
        pair loss (same expression, neutral w).
        """
        w = self._check_weights(weights)
        q = self.critic.quantiles(states, actions)
        rows, dq = per_transition_quantile_loss(q, targets, self.critic.taus)
        b = q.shape[1]
        loss = float(np.dot(w, rows.sum(axis=0))) / b
        grads = self.critic.online.params.zeros_like()
        self.critic.online.backward({"q": dq * (w[None, :, None] / b)}, grads)
        return loss, grads

    def actor_and_temperature_update(self, states, weights=None,
                                     rng: np.random.Generator | None = None):
        """One step on the policy and on the entropy temperature.

        Actor loss: mean of alpha * log pi - mean-over-quantiles of the
        pairwise-min online Q at a fresh reparameterized action.
        Temperature loss: -log_alpha * mean(log pi + target entropy), so
        the alpha gradient vanishes when entropy sits at the target.
        """
        draw = rng if rng is not None else self._rng
        b = states.shape[0]
        coef = np.full(b, 1.0 / b)
        if self.weight_actor and weights is not None:
            coef = self._check_weights(weights) / b
        actions, log_probs = self.policy.sample(states, draw)
        q = self.critic.quantiles(states, actions)
        min_q, mask = QuantileCritic.min_pair(q)
        actor_loss = float(np.dot(coef, self.alpha * log_probs - min_q.mean(axis=-1)))

        upstream = mask * (-coef[None, :, None] / self.critic.n_quantiles)
        din = self.critic.online.backward({"q": upstream}, grads=None,
                                          need_input_grad=True)
        d_actions = din[..., self.state_dim:].sum(axis=0)
        pgrads = self.policy.net.params.zeros_like()
        self.policy.backward(d_actions, self.alpha * coef, pgrads)
        adam_step(self.policy.net.params, pgrads, self.policy.opt)

        gap = float(np.mean(log_probs)) + self.target_entropy
        alpha_loss = -float(self._alpha_params.view("log_alpha")[0]) * gap
        agrads = self._alpha_params.zeros_like()
        agrads.view("log_alpha")[...] = -gap
        adam_step(self._alpha_params, agrads, self._alpha_opt)
        return actor_loss, alpha_loss, -float(np.mean(log_probs))

    def update(self, states, actions, rewards, next_states, dones, weights,
               rng: np.random.Generator | None = None) -> dict[str, float]:
        """One full SAC step: critic, actor, temperature, target tracking."""
        draw = rng if rng is not None else self._rng
        targets = self.critic_targets(rewards, next_states, dones, draw)
        critic_loss, cgrads = self.weighted_critic_loss(
            states, actions, targets, weights)
        adam_step(self.critic.online.params, cgrads, self.critic.opt)
        actor_loss, alpha_loss, entropy = self.actor_and_temperature_update(
            states, weights, draw)
        self.critic.polyak_update()
        return {"critic_loss": critic_loss, "actor_loss": actor_loss,
                "alpha_loss": alpha_loss, "entropy": entropy,
                "alpha": self.alpha}

    def save(self, path) -> None:
        """Versioned parameter dump (architecture descriptor + flat arrays)."""
        np.savez(path,
                 format_version=1,
                 kind="sac",
                 state_dim=self.state_dim,
                 action_dim=self.action_dim,
                 action_low=self.policy.low,
                 action_high=self.policy.high,
                 hidden=np.asarray(self.policy.hidden, dtype=np.int64),
                 n_quantiles=self.critic.n_quantiles,
                 gamma=self.gamma,
                 polyak_tau=self.critic.polyak_tau,
                 weight_actor=self.weight_actor,
                 policy_flat=self.policy.net.params.flat,
                 critic_flat=self.critic.online.params.flat,
                 critic_target_flat=self.critic.target.params.flat,
                 log_alpha=self._alpha_params.view("log_alpha"))

    @classmethod
    def load(cls, path, rng: np.random.Generator | None = None) -> "SacAgent":
        with np.load(path) as z:
            if int(z["format_version"]) != 1:
                raise ValueError(f"unsupported checkpoint version {z['format_version']}")
            if str(z["kind"]) != "sac":
                raise ValueError(f"not an agent checkpoint: kind={z['kind']}")
            agent = cls(int(z["state_dim"]), int(z["action_dim"]),
                        z["action_low"], z["action_high"],
                        hidden=tuple(int(h) for h in z["hidden"]),
                        n_quantiles=int(z["n_quantiles"]),
                        gamma=float(z["gamma"]),
                        polyak_tau=float(z["polyak_tau"]),
                        weight_actor=bool(z["weight_actor"]),
                        rng=rng)
            agent.policy.net.params.flat[...] = z["policy_flat"]
            agent.critic.online.params.flat[...] = z["critic_flat"]
            agent.critic.target.params.flat[...] = z["critic_target_flat"]
            agent._alpha_params.view("log_alpha")[...] = z["log_alpha"]
        return agent
