"""Diagonal-Gaussian ensemble baseline for the transition model.

Members regress the conditional mean and log-variance of [r, s'] by
maximum likelihood.  On multimodal dynamics this family can only place its
mass around the conditional mean, which may be a state no sample ever
produces; it exists here as the unimodal comparison the IMLE model is
measured against, and as the `gaussian` model choice in experiments.
"""

from __future__ import annotations

import numpy as np

from ..numkit import (
    AdamState,
    NonFiniteGradient,
    UsageError,
    adam_step,
    bound_logvar,
    build_residual_net,
    gaussian_nll_loss_and_grad,
)
from .uncertainty import PredictionBatch, summarize_predictions


class GaussianEnsemble:
    """K independently trained mean/log-variance transition models."""

    kind = "gaussian"

    def __init__(self, state_dim: int, action_dim: int, k: int = 7,
                 hidden: int = 32, blocks: int = 3, lr: float = 1e-3,
                 rngs: list[np.random.Generator] | None = None, seed: int = 0):
        if k < 1:
            raise ValueError("ensemble needs at least one member")
        if rngs is None:
            rngs = [np.random.default_rng(s)
                    for s in np.random.SeedSequence(seed).spawn(k)]
        if len(rngs) != k:
            raise ValueError("need one rng stream per member")
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.k = int(k)
        self.hidden = int(hidden)
        self.blocks = int(blocks)
        self.lr = float(lr)
        self.in_dim = self.state_dim + self.action_dim
        self.out_dim = 1 + self.state_dim
        self.net = build_residual_net(self.in_dim, hidden, blocks,
                                      {"mean": self.out_dim,
                                       "logvar": self.out_dim}, rngs, (k,))
        for name in ("mean", "logvar"):
            self.net.params.view(name + ".W")[...] = 0.0
            self.net.params.view(name + ".b")[...] = 0.0
        self.opt = AdamState(self.net.params, lr)
        self._rngs = rngs
        self.trained = False

    @property
    def passes(self):
        return self.net.passes

    def _check_dims(self, s: np.ndarray, a: np.ndarray) -> None:
        if s.shape[-1] != self.state_dim:
            raise ValueError(f"expected state dim {self.state_dim}, got {s.shape[-1]}")
        if a.shape[-1] != self.action_dim:
            raise ValueError(f"expected action dim {self.action_dim}, got {a.shape[-1]}")

    def train_ensemble(self, states: np.ndarray, actions: np.ndarray,
                       targets: np.ndarray, updates: int,
                       batch_size: int) -> np.ndarray:
        """Per member: `updates` likelihood steps on bootstrap minibatches.
        Returns the (K, updates) pre-step loss traces."""
        n = states.shape[0]
        if n == 0:
            raise ValueError("cannot train on an empty buffer")
        traces = np.empty((self.k, updates))
        for u in range(updates):
            idx = np.stack([rng.integers(0, n, size=batch_size)
                            for rng in self._rngs])
            x = np.concatenate([states[idx], actions[idx]], axis=-1)
            y_b = targets[idx]
            out = self.net.forward(x)
            loss, dmean, draw = gaussian_nll_loss_and_grad(
                out["mean"], out["logvar"], y_b)
            if not np.all(np.isfinite(loss)):
                raise NonFiniteGradient("non-finite model loss; step rejected")
            grads = self.net.params.zeros_like()
            self.net.backward({"mean": dmean, "logvar": draw}, grads)
            adam_step(self.net.params, grads, self.opt)
            traces[:, u] = loss
        if updates > 0:
            self.trained = True
        return traces

    def mean_prediction(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Per-member conditional means, shape (K, B, 1 + state_dim)."""
        self._check_dims(s, a)
        x = np.broadcast_to(np.concatenate([s, a], axis=-1),
                            (self.k, s.shape[0], self.in_dim))
        return self.net.forward(np.ascontiguousarray(x))["mean"]

    def predict_batch(self, s: np.ndarray, a: np.ndarray, m: int,
                      rng: np.random.Generator,
                      allow_untrained: bool = False) -> PredictionBatch:
        """m Gaussian draws per member per query, reduced to one chosen
        transition plus uncertainty."""
        if m < 2:
            raise ValueError("need m >= 2 samples per member")
        if not self.trained and not allow_untrained:
            raise UsageError("predicting from an untrained ensemble "
                             "(pass allow_untrained=True to permit)")
        self._check_dims(s, a)
        b = s.shape[0]
        x = np.broadcast_to(np.concatenate([s, a], axis=-1),
                            (self.k, b, self.in_dim))
        out = self.net.forward(np.ascontiguousarray(x))
        lv, _ = bound_logvar(out["logvar"])
        std = np.exp(0.5 * lv)
        eps = rng.normal(size=(self.k, m, b, self.out_dim))
        preds = out["mean"][:, None] + std[:, None] * eps
        return summarize_predictions(preds, rng)

    def save(self, path) -> None:
        """Versioned checkpoint: architecture descriptor + exact parameters."""
        np.savez(path, format_version=1, kind=self.kind,
                 state_dim=self.state_dim, action_dim=self.action_dim,
                 k=self.k, hidden=self.hidden, blocks=self.blocks, lr=self.lr,
                 trained=self.trained, flat=self.net.params.flat)

    @classmethod
    def _restore(cls, data) -> "GaussianEnsemble":
        model = cls(state_dim=int(data["state_dim"]),
                    action_dim=int(data["action_dim"]), k=int(data["k"]),
                    hidden=int(data["hidden"]), blocks=int(data["blocks"]),
                    lr=float(data["lr"]))
        model.net.params.flat[...] = data["flat"]
        model.trained = bool(data["trained"])
        return model
