"""Tanh-squashed Gaussian policy with reparameterized sampling.

The network maps a state to a per-dimension mean and log-std; actions are
tanh(mean + std * eps) rescaled to the env bounds.  sample() caches what
backward() needs, so the actor step can push loss gradients w.r.t. the
emitted action and its log-probability through the draw in closed form.
"""

from __future__ import annotations

import numpy as np

from ..numkit import AdamState, UsageError, build_mlp

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
# keeps log(1 - tanh^2) finite when the squash saturates
SQUASH_EPS = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


class TanhGaussianPolicy:
    """Stochastic policy pi(a|s) with actions squashed into [low, high]."""

    def __init__(self, state_dim: int, action_dim: int,
                 action_low: np.ndarray, action_high: np.ndarray,
                 hidden: tuple[int, ...] = (64, 64), lr: float = 3e-4,
                 rng: np.random.Generator | None = None, seed: int = 0):
        low = np.broadcast_to(np.asarray(action_low, dtype=np.float64),
                              (action_dim,)).copy()
        high = np.broadcast_to(np.asarray(action_high, dtype=np.float64),
                               (action_dim,)).copy()
        if not np.all(high > low):
            raise ValueError("action bounds must satisfy high > low")
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.low = low
        self.high = high
        self.center = 0.5 * (low + high)
        self.halfspan = 0.5 * (high - low)
        if rng is None:
            rng = np.random.default_rng(seed)
        self.net = build_mlp(state_dim, hidden,
                             {"mean": action_dim, "log_std": action_dim}, rng)
        self.opt = AdamState(self.net.params, lr)
        self._cache: dict | None = None

    def _heads(self, states: np.ndarray):
        out = self.net.forward(states)
        return out["mean"], out["log_std"]

    def mean_action(self, states: np.ndarray) -> np.ndarray:
        """Deterministic action: squashed mean, no sampling."""
        mean, _ = self._heads(states)
        return self.center + self.halfspan * np.tanh(mean)

    def act(self, states: np.ndarray, rng: np.random.Generator | None = None,
            deterministic: bool = False) -> np.ndarray:
        """Actions for env interaction; never leaves a backward cache."""
        if deterministic:
            return self.mean_action(states)
        actions, _ = self.sample(states, rng)
        self._cache = None
        return actions

    def sample(self, states: np.ndarray, rng: np.random.Generator | None = None,
               eps: np.ndarray | None = None):
        """Reparameterized draw -> (actions, per-sample log-probabilities).

        Caches intermediates; the next backward() consumes them.  Pass eps
        to pin the noise (finite-difference tests), otherwise rng draws it.
        """
        mean, raw = self._heads(states)
        if eps is None:
            if rng is None:
                raise UsageError("sample needs an rng when eps is not given")
            eps = rng.standard_normal(mean.shape)
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        u = mean + std * eps
        t = np.tanh(u)
        actions = self.center + self.halfspan * t
        gauss = -0.5 * (np.square(eps) + LOG_2PI) - log_std
        squash = np.log1p(-np.square(t) + SQUASH_EPS) + np.log(self.halfspan)
        log_probs = np.sum(gauss - squash, axis=-1)
        self._cache = {"raw": raw, "std": std, "eps": eps, "t": t}
        return actions, log_probs

    def backward(self, d_actions: np.ndarray, d_log_probs: np.ndarray,
                 grads) -> None:
        """Accumulate parameter gradients for the latest sample().

        d_actions is the loss gradient w.r.t. the emitted actions,
        d_log_probs w.r.t. the per-sample log-probabilities.
        """
        if self._cache is None:
            raise UsageError("policy backward before sample")
        c = self._cache
        self._cache = None
        t, std, eps, raw = c["t"], c["std"], c["eps"], c["raw"]
        sech2 = 1.0 - np.square(t)
        # d log pi / du: only the squash correction depends on u
        dlp_du = 2.0 * t * sech2 / (sech2 + SQUASH_EPS)
        du = d_actions * self.halfspan * sech2 + d_log_probs[..., None] * dlp_du
        dmean = du
        dlog_std = du * std * eps - d_log_probs[..., None]
        inside = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
        self.net.backward({"mean": dmean,
                           "log_std": np.where(inside, dlog_std, 0.0)}, grads)
