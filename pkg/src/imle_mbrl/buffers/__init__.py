"""Replay storage, mixed real/synthetic batches, and model rollouts.

Real environment transitions always carry confidence weight 1; synthetic
transitions carry the 1/(sigma+1) weight computed when the model emitted
them.  The model store is cleared and refilled on every training cycle, so
stale rollouts from an older model never linger.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class WeightedTransition:
    """One (s, a, r, s', done, w) tuple with its confidence weight."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    weight: float

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=np.float64))
        object.__setattr__(self, "action", np.asarray(self.action, dtype=np.float64))
        object.__setattr__(self, "next_state",
                           np.asarray(self.next_state, dtype=np.float64))
        if self.state.shape != self.next_state.shape:
            raise ValueError("state and next_state dims differ")
        if not np.isfinite(self.state).all() or not np.isfinite(self.next_state).all():
            raise ValueError("non-finite state")
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"weight must be in (0, 1], got {self.weight}")


@dataclass(frozen=True)
class Batch:
    """Column arrays for a set of transitions."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = self.states.shape[0]
        for f in fields(self):
            if getattr(self, f.name).shape[0] != n:
                raise ValueError(f"{f.name} row count differs from states")
        if self.weights.size and (np.any(self.weights <= 0.0)
                                  or np.any(self.weights > 1.0)):
            raise ValueError("weights must lie in (0, 1]")

    def __len__(self) -> int:
        return self.states.shape[0]


class ReplayStore:
    """Bounded FIFO ring of weighted transitions, stored column-wise.

    One writer; sampling returns fresh copies, so readers never alias the
    ring (the snapshot side of the one-writer/many-readers contract).
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self._s = np.empty((capacity, state_dim))
        self._a = np.empty((capacity, action_dim))
        self._r = np.empty(capacity)
        self._s2 = np.empty((capacity, state_dim))
        self._d = np.empty(capacity)
        self._w = np.empty(capacity)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def add(self, state, action, reward: float, next_state, done: bool,
            weight: float) -> None:
        """Append one transition, evicting the oldest when full."""
        if not 0.0 < weight <= 1.0:
            raise ValueError(f"weight must be in (0, 1], got {weight}")
        i = self.inserted % self.capacity
        self._s[i] = state
        self._a[i] = action
        self._r[i] = reward
        self._s2[i] = next_state
        self._d[i] = float(done)
        self._w[i] = weight
        self.inserted += 1

    def extend(self, batch: Batch) -> None:
        for i in range(len(batch)):
            self.add(batch.states[i], batch.actions[i], batch.rewards[i],
                     batch.next_states[i], bool(batch.dones[i]),
                     batch.weights[i])

    def clear(self) -> None:
        self.inserted = 0

    def sample_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n stored states uniformly with replacement (rollout starts)."""
        size = len(self)
        if size == 0:
            raise ValueError("cannot sample from an empty store")
        return self._s[rng.integers(0, size, size=n)].copy()

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """n transitions uniformly with replacement, as copied columns."""
        size = len(self)
        if size == 0:
            raise ValueError("cannot sample from an empty store")
        idx = rng.integers(0, size, size=n)
        return self._take(idx)

    def contents(self) -> Batch:
        """Every stored transition, in slot order, as copied columns."""
        return self._take(np.arange(len(self)))

    def _take(self, idx: np.ndarray) -> Batch:
        return Batch(self._s[idx].copy(), self._a[idx].copy(),
                     self._r[idx].copy(), self._s2[idx].copy(),
                     self._d[idx].copy(), self._w[idx].copy())


@dataclass(frozen=True)
class RolloutStats:
    """Per-depth means over one rollout batch (depth axis first)."""

    weight_mean: np.ndarray
    sigma_mean: np.ndarray
    epistemic_mean: np.ndarray
    aleatoric_mean: np.ndarray


def generate_rollouts(ensemble, policy, env_store: ReplayStore, horizon: int,
                      rollouts: int, m: int, rng: np.random.Generator):
    """Model rollouts from real start states -> (Batch, RolloutStats).

    Starts are drawn uniformly with replacement from the env store; each
    of the `horizon` steps samples policy actions, queries the ensemble
    once for all rollouts, and records the emitted transition with its
    confidence weight.  Synthetic transitions never terminate (done stays
    false; there is no termination model).
    """
    if horizon < 1:
        raise ValueError("rollout horizon must be at least 1")
    if rollouts < 1:
        raise ValueError("need at least one rollout")
    states = env_store.sample_states(rollouts, rng)
    cols = {k: [] for k in ("s", "a", "r", "s2", "w")}
    stats = {k: [] for k in ("w", "sig", "epi", "ale")}
    for _ in range(horizon):
        actions = policy.act(states, rng)
        preds = ensemble.predict_batch(states, actions, m, rng)
        cols["s"].append(states)
        cols["a"].append(actions)
        cols["r"].append(preds.reward)
        cols["s2"].append(preds.next_state)
        cols["w"].append(preds.weight)
        stats["w"].append(preds.weight.mean())
        stats["sig"].append(preds.sigma.mean())
        stats["epi"].append(preds.epistemic.mean())
        stats["ale"].append(preds.aleatoric.mean())
        states = preds.next_state
    batch = Batch(np.concatenate(cols["s"]), np.concatenate(cols["a"]),
                  np.concatenate(cols["r"]), np.concatenate(cols["s2"]),
                  np.zeros(horizon * rollouts), np.concatenate(cols["w"]))
    return batch, RolloutStats(*(np.array(stats[k])
                                 for k in ("w", "sig", "epi", "ale")))


def refresh_model_store(store: ReplayStore, batch: Batch) -> None:
    """Replace the store's contents with one fresh rollout batch."""
    store.clear()
    store.extend(batch)


def sample_mixed_batch(env_store: ReplayStore, model_store: ReplayStore,
                       batch_size: int, real_fraction: float,
                       rng: np.random.Generator) -> Batch:
    """ceil(rho * batch) real transitions (weight forced to 1) plus
    synthetic ones from the model store; all real when the model store is
    empty."""
    if not 0.0 <= real_fraction <= 1.0:
        raise ValueError(f"real fraction must be in [0, 1], got {real_fraction}")
    if batch_size < 1:
        raise ValueError("batch size must be positive")
    n_real = int(np.ceil(real_fraction * batch_size))
    if len(model_store) == 0:
        n_real = batch_size
    real = env_store.sample(n_real, rng)
    real.weights[...] = 1.0
    if n_real == batch_size:
        return real
    syn = model_store.sample(batch_size - n_real, rng)
    return Batch(*(np.concatenate([getattr(real, f.name), getattr(syn, f.name)])
                   for f in fields(Batch)))


def export_transitions(path, batch: Batch) -> None:
    """Write one transition per line: s | a | r | s' | done | w.

    Vector components are space-separated; floats use repr so a re-parse
    reproduces the batch exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(batch)):
            fh.write(" | ".join([
                " ".join(repr(float(v)) for v in batch.states[i]),
                " ".join(repr(float(v)) for v in batch.actions[i]),
                repr(float(batch.rewards[i])),
                " ".join(repr(float(v)) for v in batch.next_states[i]),
                "1" if batch.dones[i] else "0",
                repr(float(batch.weights[i])),
            ]) + "\n")


def parse_transitions(path) -> Batch:
    """Inverse of export_transitions."""
    rows = {k: [] for k in ("s", "a", "r", "s2", "d", "w")}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            s, a, r, s2, d, w = (part.strip() for part in line.split("|"))
            rows["s"].append([float(v) for v in s.split()])
            rows["a"].append([float(v) for v in a.split()])
            rows["r"].append(float(r))
            rows["s2"].append([float(v) for v in s2.split()])
            rows["d"].append(float(d))
            rows["w"].append(float(w))
    return Batch(np.array(rows["s"]), np.array(rows["a"]),
                 np.array(rows["r"]), np.array(rows["s2"]),
                 np.array(rows["d"]), np.array(rows["w"]))


__all__ = [
    "Batch",
    "ReplayStore",
    "RolloutStats",
    "WeightedTransition",
    "export_transitions",
    "generate_rollouts",
    "parse_transitions",
    "refresh_model_store",
    "sample_mixed_batch",
]
