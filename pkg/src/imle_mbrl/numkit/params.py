"""Flat parameter storage and optimizer state.

Every network keeps its weights in a single contiguous float64 buffer with
named views into it, so whole-network operations (Adam steps, Polyak target
tracking, checkpointing) are a handful of vectorized array ops regardless of
how many layers the network has.  A parameter set may carry a leading stack
shape, e.g. (K,) for an ensemble of K identically shaped networks whose
members are trained in one batched pass.
"""

from __future__ import annotations

import numpy as np


class NonFiniteGradient(RuntimeError):
    """Raised when an optimizer step receives NaN or infinite gradients."""


class UsageError(RuntimeError):
    """Raised when forward/backward calls are sequenced incorrectly."""


class ParameterSet:
    """Ordered named tensors backed by one flat buffer.

    Entries are declared before `freeze()` allocates storage; shapes are
    immutable afterwards.  `view(name)` returns a writable ndarray view of
    shape stack_shape + entry_shape.
    """

    def __init__(self, stack_shape: tuple[int, ...] = ()):
        self.stack_shape = tuple(int(d) for d in stack_shape)
        self._specs: list[tuple[str, tuple[int, ...], int, int]] = []
        self._names: set[str] = set()
        self.flat: np.ndarray | None = None
        self._views: dict[str, np.ndarray] = {}
        self._size = 0

    @property
    def size(self) -> int:
        """Per-stack-member parameter count."""
        return self._size

    @property
    def frozen(self) -> bool:
        return self.flat is not None

    def declare(self, name: str, shape: tuple[int, ...]) -> None:
        if self.frozen:
            raise UsageError("cannot declare parameters after freeze()")
        if name in self._names:
            raise ValueError(f"duplicate parameter name: {name!r}")
        shape = tuple(int(d) for d in shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        self._specs.append((name, shape, self._size, n))
        self._names.add(name)
        self._size += n

    def freeze(self) -> "ParameterSet":
        if not self.frozen:
            self.flat = np.zeros(self.stack_shape + (self._size,), dtype=np.float64)
            self._build_views()
        return self

    def _build_views(self) -> None:
        self._views = {}
        for name, shape, off, n in self._specs:
            seg = self.flat[..., off : off + n]
            self._views[name] = seg.reshape(self.stack_shape + shape)

    def view(self, name: str) -> np.ndarray:
        if not self.frozen:
            raise UsageError("parameter set not frozen")
        return self._views[name]

    def names(self) -> list[str]:
        return [s[0] for s in self._specs]

    def zeros_like(self) -> "ParameterSet":
        """Same layout, freshly zeroed buffer (used for gradients)."""
        other = ParameterSet(self.stack_shape)
        other._specs = list(self._specs)
        other._names = set(self._names)
        other._size = self._size
        return other.freeze()

    def clone(self) -> "ParameterSet":
        other = self.zeros_like()
        other.flat[...] = self.flat
        return other

    def member(self, k: int) -> "ParameterSet":
        """View of stack member k, sharing storage with this set."""
        if len(self.stack_shape) != 1:
            raise UsageError("member() requires a 1-D stack")
        other = ParameterSet(())
        other._specs = list(self._specs)
        other._names = set(self._names)
        other._size = self._size
        other.flat = self.flat[k]
        other._build_views()
        return other

    def zero_(self) -> None:
        self.flat[...] = 0.0


class AdamState:
    """Bias-corrected adaptive-moment accumulators for one ParameterSet.

    The step counter has the stack shape so ensemble members sliced out via
    `member()` keep independent counts.
    """

    def __init__(self, params: ParameterSet, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not params.frozen:
            raise UsageError("freeze parameters before creating AdamState")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros_like(params.flat)
        self.v = np.zeros_like(params.flat)
        self.t = np.zeros(params.stack_shape, dtype=np.int64)

    def member(self, k: int) -> "AdamState":
        """Stack member k's state, sharing storage (incl. the step counter)."""
        if self.t.ndim != 1:
            raise UsageError("member() requires a 1-D stack")
        other = AdamState.__new__(AdamState)
        other.lr, other.beta1, other.beta2, other.eps = self.lr, self.beta1, self.beta2, self.eps
        other.m = self.m[k]
        other.v = self.v[k]
        other.t = self.t[k : k + 1].reshape(())
        return other


def adam_step(params: ParameterSet, grads: ParameterSet, state: AdamState) -> None:
    """One Adam update in place.  Rejects non-finite gradients."""
    g = grads.flat
    if params.flat.shape != g.shape:
        raise ValueError("gradient shape does not match parameters")
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("non-finite gradient; update rejected")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * np.square(g)
    # broadcast bias correction over the trailing parameter axis
    t = state.t[..., None].astype(np.float64)
    mhat = state.m / (1.0 - np.power(state.beta1, t))
    vhat = state.v / (1.0 - np.power(state.beta2, t))
    params.flat -= state.lr * mhat / (np.sqrt(vhat) + state.eps)


def polyak_update(target: ParameterSet, online: ParameterSet, tau: float) -> None:
    """target <- (1-tau)*target + tau*online.  Requires tau in (0, 1]."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"polyak coefficient must be in (0, 1], got {tau}")
    target.flat *= (1.0 - tau)
    target.flat += tau * online.flat
