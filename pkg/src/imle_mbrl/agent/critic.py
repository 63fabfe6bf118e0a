"""Twin distributional Q-networks over quantile atoms.

Both online critics live in one (2,)-stacked network so a single batched
pass evaluates the pair; the target copies are a cloned parameter set
behind an identical structure.  Quantile outputs are used order-free.
"""

from __future__ import annotations

import numpy as np

from ..numkit import (
    AdamState,
    Network,
    mlp_structure,
    build_mlp,
    polyak_update,
    quantile_midpoints,
)


class QuantileCritic:
    """Clipped double-Q critic mapping (s, a) to N quantile values each."""

    def __init__(self, state_dim: int, action_dim: int, n_quantiles: int = 100,
                 hidden: tuple[int, ...] = (64, 64), lr: float = 3e-4,
                 polyak_tau: float = 0.005,
                 rng: np.random.Generator | None = None, seed: int = 0):
        if n_quantiles < 1:
            raise ValueError("need at least one quantile")
        if not 0.0 < polyak_tau <= 1.0:
            raise ValueError(f"polyak coefficient must be in (0, 1], got {polyak_tau}")
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.n_quantiles = int(n_quantiles)
        self.hidden = tuple(int(h) for h in hidden)
        self.polyak_tau = float(polyak_tau)
        self.taus = quantile_midpoints(n_quantiles)
        if rng is None:
            rng = np.random.default_rng(seed)
        in_dim = self.state_dim + self.action_dim
        rngs = [np.random.default_rng(s)
                for s in np.random.SeedSequence(rng.integers(2**63)).spawn(2)]
        self.online = build_mlp(in_dim, self.hidden, {"q": n_quantiles},
                                rngs, (2,))
        target_params = self.online.params.clone()
        trunk, heads = mlp_structure(in_dim, self.hidden, {"q": n_quantiles})
        self.target = Network(trunk, heads, target_params, (2,))
        self.target.bind(target_params)
        self.opt = AdamState(self.online.params, lr)

    def _pair_input(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        x = np.concatenate([states, actions], axis=-1)
        return np.broadcast_to(x, (2,) + x.shape)

    def quantiles(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Online pair's quantile values, shape (2, batch, N)."""
        return self.online.forward(self._pair_input(states, actions))["q"]

    def target_quantiles(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Target pair's quantile values, shape (2, batch, N)."""
        return self.target.forward(self._pair_input(states, actions))["q"]

    @staticmethod
    def min_pair(q: np.ndarray):
        """Elementwise minimum over the critic pair and its argmin mask.

        The mask routes gradients to whichever critic produced each minimum
        (first critic on exact ties).
        """
        first = q[0] <= q[1]
        return np.where(first, q[0], q[1]), np.stack([first, ~first])

    def polyak_update(self, tau: float | None = None) -> None:
        """target <- (1 - tau) * target + tau * online."""
        polyak_update(self.target.params, self.online.params,
                      self.polyak_tau if tau is None else tau)
