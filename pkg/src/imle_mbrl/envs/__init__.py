"""Analytic environments with known dynamics.

Two tasks: a torque-limited pendulum swing-up (3-dim observation on the
cos/sin manifold) and a one-dimensional fork whose next state jumps to one
of two modes, never their midpoint.  The fork's transition kernel is known
in closed form, which is what lets tests check that a learned model covers
both modes instead of averaging them.

All randomness flows through an injected numpy Generator, so trajectories
are reproducible from seeds alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    """Static description of one environment."""

    name: str
    state_dim: int
    action_dim: int
    action_low: float
    action_high: float
    episode_len: int

    def __post_init__(self):
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be >= 1")
        if not (np.isfinite(self.action_low) and np.isfinite(self.action_high)
                and self.action_low < self.action_high):
            raise ValueError("action bounds must be finite with low < high")


@dataclass(frozen=True)
class StepResult:
    state: np.ndarray
    reward: float
    terminal: bool
    truncated: bool

    def __post_init__(self):
        if not np.all(np.isfinite(self.state)):
            raise ValueError("non-finite state")
        if self.terminal and self.truncated:
            raise ValueError("terminal and truncated are mutually exclusive")


class PendulumEnv:
    """Swing-up pendulum: angle 0 is upright, reward is 0 there and negative
    everywhere else.  Semi-implicit Euler at dt=0.05; velocity clamped to
    [-8, 8]; torque clipped to [-2, 2]; episodes truncate after 200 steps.
    """

    spec = EnvSpec("pendulum", state_dim=3, action_dim=1,
                   action_low=-2.0, action_high=2.0, episode_len=200)

    G = 10.0
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    MANIFOLD_TOL = 1e-6

    def __init__(self, rng: np.random.Generator | None = None):
        self._rng = rng if rng is not None else np.random.default_rng()
        self._theta = 0.0
        self._thetadot = 0.0
        self._steps = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._theta = self._rng.uniform(-np.pi, np.pi)
        self._thetadot = self._rng.uniform(-1.0, 1.0)
        self._steps = 0
        return self._observe()

    def _observe(self) -> np.ndarray:
        return np.array([np.cos(self._theta), np.sin(self._theta), self._thetadot])

    def state_angle(self, state: np.ndarray) -> float:
        """Angle in (-pi, pi] recovered from a (cos, sin, speed) observation."""
        c, s = float(state[0]), float(state[1])
        if abs(c * c + s * s - 1.0) > self.MANIFOLD_TOL:
            raise ValueError("state off the cos/sin manifold")
        return float(np.arctan2(s, c))

    def transition(self, state: np.ndarray, action) -> tuple[np.ndarray, float]:
        """One deterministic dynamics step from an explicit state.

        Validates the manifold, clips the torque, and charges the reward on
        the pre-step state.  Returns (next observation, reward).
        """
        th = self.state_angle(state)
        thd = float(state[2])
        tau = float(np.clip(np.asarray(action).reshape(()),
                            self.spec.action_low, self.spec.action_high))
        reward = -(th ** 2 + 0.1 * thd ** 2 + 0.001 * tau ** 2)
        acc = (3.0 * self.G / (2.0 * self.LENGTH) * np.sin(th)
               + 3.0 * tau / (self.MASS * self.LENGTH ** 2))
        thd = float(np.clip(thd + acc * self.DT, -self.MAX_SPEED, self.MAX_SPEED))
        th = th + thd * self.DT
        return np.array([np.cos(th), np.sin(th), thd]), reward

    def step(self, action) -> StepResult:
        nxt, reward = self.transition(self._observe(), action)
        self._theta = float(np.arctan2(nxt[1], nxt[0]))
        self._thetadot = float(nxt[2])
        self._steps += 1
        return StepResult(nxt, reward, terminal=False,
                          truncated=self._steps >= self.spec.episode_len)


class BimodalForkEnv:
    """One-dimensional fork: s' = clip(s + 0.1 a + c * 0.5, -2, 2) with the
    branch c drawn uniformly from {-1, +1}.  The conditional mean of s' sits
    exactly between the two modes, at a point no sample ever visits, so a
    model that regresses to the mean predicts impossible states.
    """

    spec = EnvSpec("bimodal-fork", state_dim=1, action_dim=1,
                   action_low=-1.0, action_high=1.0, episode_len=100)

    DRIFT = 0.1
    GAP = 0.5
    BOUND = 2.0

    def __init__(self, rng: np.random.Generator | None = None):
        self._rng = rng if rng is not None else np.random.default_rng()
        self._s = 0.0
        self._steps = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._s = self._rng.uniform(-1.0, 1.0)
        self._steps = 0
        return np.array([self._s])

    def mode_locations(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        """The two (possibly clip-collapsed) support points of the next state."""
        s = float(np.asarray(state).reshape(()))
        a = float(np.clip(np.asarray(action).reshape(()),
                          self.spec.action_low, self.spec.action_high))
        center = s + self.DRIFT * a
        return np.clip(np.array([center - self.GAP, center + self.GAP]),
                       -self.BOUND, self.BOUND)

    def step(self, action: np.ndarray) -> StepResult:
        a = float(np.clip(np.asarray(action).reshape(()),
                          self.spec.action_low, self.spec.action_high))
        c = 1.0 if self._rng.integers(2) == 1 else -1.0
        self._s = float(np.clip(self._s + self.DRIFT * a + c * self.GAP,
                                -self.BOUND, self.BOUND))
        self._steps += 1
        return StepResult(np.array([self._s]), reward=-abs(self._s),
                          terminal=False,
                          truncated=self._steps >= self.spec.episode_len)


REGISTRY = {
    PendulumEnv.spec.name: PendulumEnv,
    BimodalForkEnv.spec.name: BimodalForkEnv,
}


def make(name: str, rng: np.random.Generator | None = None):
    """Instantiate a registered environment by name."""
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; "
                         f"known: {sorted(REGISTRY)}") from None
    return cls(rng)


__all__ = ["BimodalForkEnv", "EnvSpec", "PendulumEnv", "REGISTRY",
           "StepResult", "make"]
