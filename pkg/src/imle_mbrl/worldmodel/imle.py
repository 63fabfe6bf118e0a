"""Conditional implicit-maximum-likelihood ensemble of transition models.

Each member is a deterministic network g(s, a, z) -> [reward, next state]
with z drawn from a standard normal.  Training never scores likelihoods:
for every minibatch a fresh pool of candidate latents is sampled, each
datum is matched to the candidate whose output lands nearest its target
(gradient-free), and one squared-error step pulls that output toward the
target.  Every sample therefore has some latent responsible for it, which
is what keeps all modes of a stochastic transition covered instead of
averaged.

The K members train on independently bootstrapped minibatches from
independent RNG streams.  The hot paths run all members in one stacked
batched pass; per-member adapter views expose the same parameters for
single-member use.
"""

from __future__ import annotations

import numpy as np

from ..numkit import (
    AdamState,
    Network,
    NonFiniteGradient,
    UsageError,
    adam_step,
    build_residual_net,
    mse_loss_and_grad,
    residual_net_structure,
)
from .uncertainty import (
    PredictionBatch,
    UncertaintyReport,
    summarize_predictions,
)


def make_targets(rewards: np.ndarray, next_states: np.ndarray) -> np.ndarray:
    """Regression targets [r, s'] with the reward in the leading slot."""
    return np.concatenate([np.asarray(rewards)[..., None], next_states], axis=-1)


def split_target(y: np.ndarray):
    """Inverse of make_targets: (rewards, next states)."""
    return y[..., 0], y[..., 1:]


def draw_latents(rng: np.random.Generator, m: int, latent_dim: int) -> np.ndarray:
    """m candidate latents from a standard normal, shared within a minibatch."""
    if m < 1:
        raise ValueError("need at least one candidate latent")
    return rng.normal(size=(m, latent_dim))


class ImleEnsemble:
    """K independently trained conditional-IMLE transition models."""

    kind = "imle"

    def __init__(self, state_dim: int, action_dim: int, k: int = 7,
                 latent_dim: int = 16, hidden: int = 32, blocks: int = 3,
                 lr: float = 1e-3, rngs: list[np.random.Generator] | None = None,
                 seed: int = 0, normalize_targets: bool = False):
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
        self.latent_dim = int(latent_dim)
        self.hidden = int(hidden)
        self.blocks = int(blocks)
        self.lr = float(lr)
        self.in_dim = self.state_dim + self.action_dim + self.latent_dim
        self.out_dim = 1 + self.state_dim
        self.net = build_residual_net(self.in_dim, hidden, blocks,
                                      self._head_dims(), rngs, (k,))
        self._zero_heads()
        self.opt = AdamState(self.net.params, lr)
        self._rngs = rngs
        self._members: dict[int, Network] = {}
        self.trained = False
        self.normalize_targets = bool(normalize_targets)
        self._norm_count = 0
        self._norm_mean = np.zeros(self.out_dim)
        self._norm_m2 = np.zeros(self.out_dim)

    def _head_dims(self) -> dict[str, int]:
        return {"reward": 1, "state": self.state_dim}

    def _zero_heads(self) -> None:
        # zero output heads: a fresh model predicts the zero transition
        for name in self._head_dims():
            self.net.params.view(name + ".W")[...] = 0.0
            self.net.params.view(name + ".b")[...] = 0.0

    @property
    def passes(self):
        return self.net.passes

    def member_net(self, k: int) -> Network:
        """Single-member view sharing parameters and the pass counter."""
        if not 0 <= k < self.k:
            raise ValueError(f"member index {k} out of range")
        if k not in self._members:
            trunk, heads = residual_net_structure(self.in_dim, self.hidden,
                                                  self.blocks, self._head_dims())
            params = self.net.params.member(k)
            net = Network(trunk, heads, params, ())
            net.bind(params)
            net.passes = self.net.passes
            self._members[k] = net
        return self._members[k]

    def _check_dims(self, s: np.ndarray, a: np.ndarray) -> None:
        if s.shape[-1] != self.state_dim:
            raise ValueError(f"expected state dim {self.state_dim}, got {s.shape[-1]}")
        if a.shape[-1] != self.action_dim:
            raise ValueError(f"expected action dim {self.action_dim}, got {a.shape[-1]}")

    def _target_scale(self) -> np.ndarray:
        if not self.normalize_targets or self._norm_count < 2:
            return np.ones(self.out_dim)
        return np.sqrt(self._norm_m2 / self._norm_count + 1e-8)

    def _update_norm_stats(self, y: np.ndarray) -> None:
        # batched Welford update of running per-dimension target variance
        y = y.reshape(-1, self.out_dim)
        n_b = y.shape[0]
        mean_b = y.mean(axis=0)
        m2_b = ((y - mean_b) ** 2).sum(axis=0)
        n = self._norm_count
        delta = mean_b - self._norm_mean
        total = n + n_b
        self._norm_mean += delta * (n_b / total)
        self._norm_m2 += m2_b + delta ** 2 * (n * n_b / total)
        self._norm_count = total

    def generate(self, member: int, s: np.ndarray, a: np.ndarray,
                 z: np.ndarray):
        """One forward pass of member `member`: (s, a, z) -> (s', r).

        Accepts single vectors or batches; no iterative refinement.
        """
        s, a, z = np.asarray(s, float), np.asarray(a, float), np.asarray(z, float)
        single = s.ndim == 1
        if single:
            s, a, z = s[None], a[None], z[None]
        self._check_dims(s, a)
        if z.shape[-1] != self.latent_dim:
            raise ValueError(f"expected latent dim {self.latent_dim}, got {z.shape[-1]}")
        out = self.member_net(member).forward(
            np.concatenate([s, a, z], axis=-1))
        nxt, r = out["state"], out["reward"][..., 0]
        if single:
            return nxt[0], float(r[0])
        return nxt, r

    def assign_latents(self, member: int, s: np.ndarray, a: np.ndarray,
                       y: np.ndarray, candidates: np.ndarray) -> np.ndarray:
        """Index of the nearest-output candidate latent for each datum.

        candidates: (m, latent_dim), one pool shared by the whole batch.
        Gradient-free: forward passes only.
        """
        z = np.asarray(candidates, float)
        m, b = z.shape[0], s.shape[0]
        x = np.empty((m, b, self.in_dim))
        x[..., :self.state_dim] = s[None]
        x[..., self.state_dim:self.state_dim + self.action_dim] = a[None]
        x[..., self.state_dim + self.action_dim:] = z[:, None, :]
        out = self.member_net(member).forward(x.reshape(m * b, self.in_dim))
        preds = np.concatenate([out["reward"], out["state"]], axis=-1)
        scale = self._target_scale()
        d = np.sum(((preds.reshape(m, b, self.out_dim) - y[None]) / scale) ** 2,
                   axis=-1)
        return d.argmin(axis=0)

    def imle_update(self, member: int, s: np.ndarray, a: np.ndarray,
                    y: np.ndarray, latents: np.ndarray) -> float:
        """One squared-error optimizer step on the assigned latents.
        Returns the pre-step loss."""
        net = self.member_net(member)
        out = net.forward(np.concatenate([s, a, latents], axis=-1))
        pred = np.concatenate([out["reward"], out["state"]], axis=-1)
        loss, grad = mse_loss_and_grad(pred, y)
        if not np.isfinite(loss):
            raise NonFiniteGradient("non-finite model loss; step rejected")
        grads = net.params.zeros_like()
        net.backward({"reward": grad[..., :1], "state": grad[..., 1:]}, grads)
        adam_step(net.params, grads, self.opt.member(member))
        return float(loss)

    def train_ensemble(self, states: np.ndarray, actions: np.ndarray,
                       targets: np.ndarray, updates: int, m: int,
                       batch_size: int) -> np.ndarray:
        """Train all members: per member, `updates` rounds of bootstrap
        minibatch -> fresh candidate pool -> nearest-latent assignment ->
        one MSE step.  Members share nothing; all K run in one stacked pass
        per round.  Returns the (K, updates) pre-step loss traces.
        """
        n = states.shape[0]
        if n == 0:
            raise ValueError("cannot train on an empty buffer")
        k, sd, ad, ld = self.k, self.state_dim, self.action_dim, self.latent_dim
        traces = np.empty((k, updates))
        for u in range(updates):
            idx = np.stack([rng.integers(0, n, size=batch_size)
                            for rng in self._rngs])
            z_cand = np.stack([draw_latents(rng, m, ld) for rng in self._rngs])
            s_b, a_b, y_b = states[idx], actions[idx], targets[idx]
            if self.normalize_targets:
                self._update_norm_stats(y_b)
            scale = self._target_scale()
            # nearest-candidate assignment under the current parameters
            x = np.empty((k, m, batch_size, self.in_dim))
            x[..., :sd] = s_b[:, None]
            x[..., sd:sd + ad] = a_b[:, None]
            x[..., sd + ad:] = z_cand[:, :, None, :]
            out = self.net.forward(x.reshape(k, m * batch_size, self.in_dim))
            preds = np.concatenate([out["reward"], out["state"]], axis=-1)
            d = np.sum(((preds.reshape(k, m, batch_size, self.out_dim)
                         - y_b[:, None]) / scale) ** 2, axis=-1)
            j = d.argmin(axis=1)
            z_star = z_cand[np.arange(k)[:, None], j]
            out = self.net.forward(np.concatenate([s_b, a_b, z_star], axis=-1))
            pred = np.concatenate([out["reward"], out["state"]], axis=-1)
            loss, grad = mse_loss_and_grad(pred, y_b)
            if not np.all(np.isfinite(loss)):
                raise NonFiniteGradient("non-finite model loss; step rejected")
            grads = self.net.params.zeros_like()
            self.net.backward({"reward": grad[..., :1], "state": grad[..., 1:]},
                              grads)
            adam_step(self.net.params, grads, self.opt)
            traces[:, u] = loss
        if updates > 0:
            self.trained = True
        return traces

    def predict_batch(self, s: np.ndarray, a: np.ndarray, m: int,
                      rng: np.random.Generator,
                      allow_untrained: bool = False) -> PredictionBatch:
        """All K*m sampled transitions for each query, reduced to one chosen
        transition plus uncertainty.  Latent draws are fresh per query and
        shared across members."""
        if m < 2:
            raise ValueError("need m >= 2 samples per member")
        if not self.trained and not allow_untrained:
            raise UsageError("predicting from an untrained ensemble "
                             "(pass allow_untrained=True to permit)")
        self._check_dims(s, a)
        k, sd, ad = self.k, self.state_dim, self.action_dim
        b = s.shape[0]
        z = rng.normal(size=(m, b, self.latent_dim))
        x = np.empty((k, m, b, self.in_dim))
        x[..., :sd] = s[None, None]
        x[..., sd:sd + ad] = a[None, None]
        x[..., sd + ad:] = z[None]
        out = self.net.forward(x.reshape(k, m * b, self.in_dim))
        preds = np.concatenate([out["reward"], out["state"]],
                               axis=-1).reshape(k, m, b, self.out_dim)
        return summarize_predictions(preds, rng)

    def predict_with_uncertainty(self, s: np.ndarray, a: np.ndarray, m: int,
                                 rng: np.random.Generator,
                                 allow_untrained: bool = False):
        """Single-query wrapper: ((s', r), UncertaintyReport, w)."""
        batch = self.predict_batch(np.asarray(s, float)[None],
                                   np.asarray(a, float)[None], m, rng,
                                   allow_untrained)
        report = UncertaintyReport(sigma=float(batch.sigma[0]),
                                   epistemic=float(batch.epistemic[0]),
                                   aleatoric=float(batch.aleatoric[0]))
        return (batch.next_state[0], float(batch.reward[0])), report, \
            float(batch.weight[0])

    def save(self, path) -> None:
        """Versioned checkpoint: architecture descriptor + exact parameters."""
        np.savez(path, format_version=1, kind=self.kind,
                 state_dim=self.state_dim, action_dim=self.action_dim,
                 k=self.k, latent_dim=self.latent_dim, hidden=self.hidden,
                 blocks=self.blocks, lr=self.lr,
                 trained=self.trained,
                 normalize_targets=self.normalize_targets,
                 norm_count=self._norm_count, norm_mean=self._norm_mean,
                 norm_m2=self._norm_m2,
                 flat=self.net.params.flat)

    @classmethod
    def _restore(cls, data) -> "ImleEnsemble":
        model = cls(state_dim=int(data["state_dim"]),
                    action_dim=int(data["action_dim"]), k=int(data["k"]),
                    latent_dim=int(data["latent_dim"]),
                    hidden=int(data["hidden"]), blocks=int(data["blocks"]),
                    lr=float(data["lr"]),
                    normalize_targets=bool(data["normalize_targets"]))
        model.net.params.flat[...] = data["flat"]
        model.trained = bool(data["trained"])
        model._norm_count = int(data["norm_count"])
        model._norm_mean = data["norm_mean"].copy()
        model._norm_m2 = data["norm_m2"].copy()
        return model


def load_model(path):
    """Load any saved model checkpoint, dispatching on its kind tag."""
    from .gaussian import GaussianEnsemble

    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        kind = str(data["kind"])
        for cls in (ImleEnsemble, GaussianEnsemble):
            if kind == cls.kind:
                return cls._restore(data)
        raise ValueError(f"unknown model kind {kind!r}")
