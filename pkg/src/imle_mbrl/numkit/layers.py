"""Layers and networks with hand-written backward passes.

Only the fixed architectures used in this project are supported: dense
layers, ReLU, row-wise L2 normalization, the residual block built from
those, and a multi-head network (shared trunk, one linear head per output).

Shapes: a network built with stack_shape (K,) holds K independent copies of
its weights and processes inputs of shape (K, ..., features) in one batched
matmul per layer.  Inputs may carry extra batch axes between the stack and
the feature axis; layers canonicalize to stack + (rows, features)
internally.

Forward passes cache what backward needs; calling backward without a
preceding forward for the same batch raises UsageError.  Every forward and
backward increments the owning network's pass counter by the number of
sample rows processed, which is what the rollout-cost assertions read.
"""

from __future__ import annotations

import numpy as np

from .params import ParameterSet, UsageError

EPS_NORM = 1e-8


class PassCounter:
    """Counts sample-row forward/backward passes through one network."""

    def __init__(self):
        self.forward = 0
        self.backward = 0

    def reset(self) -> None:
        self.forward = 0
        self.backward = 0


class Dense:
    """Affine layer y = x @ W + b with weights in the owning ParameterSet."""

    def __init__(self, name: str, in_dim: int, out_dim: int):
        self.name = name
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.W: np.ndarray | None = None
        self.b: np.ndarray | None = None
        self._x: np.ndarray | None = None
        self._lead: tuple[int, ...] | None = None

    def declare(self, params: ParameterSet) -> None:
        params.declare(self.name + ".W", (self.in_dim, self.out_dim))
        params.declare(self.name + ".b", (self.out_dim,))

    def bind(self, params: ParameterSet) -> None:
        self.W = params.view(self.name + ".W")
        self.b = params.view(self.name + ".b")

    def forward(self, x: np.ndarray) -> np.ndarray:
        snd = self.W.ndim - 2  # stack ndim
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"{self.name}: expected {self.in_dim} input features, got {x.shape[-1]}")
        if x.shape[:snd] != self.W.shape[:snd]:
            raise ValueError(
                f"{self.name}: input stack {x.shape[:snd]} does not match weights "
                f"{self.W.shape[:snd]}")
        self._lead = x.shape[:-1]
        z = x.reshape(self.W.shape[:snd] + (-1, self.in_dim))
        self._x = z
        y = np.matmul(z, self.W)
        y += self.b[..., None, :]
        return y.reshape(self._lead + (self.out_dim,))

    def backward(self, dy: np.ndarray, grads: ParameterSet | None,
                 need_input_grad: bool = True) -> np.ndarray | None:
        if self._x is None:
            raise UsageError(f"{self.name}: backward before forward")
        snd = self.W.ndim - 2
        d = dy.reshape(self.W.shape[:snd] + (-1, self.out_dim))
        if grads is not None:
            gW = grads.view(self.name + ".W")
            gb = grads.view(self.name + ".b")
            gW += np.matmul(np.swapaxes(self._x, -1, -2), d)
            gb += d.sum(axis=-2)
        if not need_input_grad:
            return None
        dx = np.matmul(d, np.swapaxes(self.W, -1, -2))
        return dx.reshape(self._lead + (self.in_dim,))


class Relu:
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        # subgradient at exactly 0 is 0, so the mask is strict
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise UsageError("relu: backward before forward")
        return np.where(self._mask, dy, 0.0)


class L2Norm:
    """Row-wise y = x / max(||x||_2, EPS_NORM) over the feature axis."""

    def __init__(self):
        self._y: np.ndarray | None = None
        self._denom: np.ndarray | None = None
        self._guarded: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        n = np.sqrt(np.sum(np.square(x), axis=-1, keepdims=True))
        self._guarded = n < EPS_NORM
        self._denom = np.maximum(n, EPS_NORM)
        self._y = x / self._denom
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._y is None:
            raise UsageError("l2norm: backward before forward")
        # below the guard the map is linear scaling by 1/EPS_NORM
        proj = np.sum(self._y * dy, axis=-1, keepdims=True)
        proj = np.where(self._guarded, 0.0, proj)
        return (dy - self._y * proj) / self._denom


class ResidualBlock:
    """Dense(h -> inner), ReLU, Dense(inner -> h), skip add, L2Norm."""

    def __init__(self, name: str, width: int, inner: int):
        self.d1 = Dense(name + ".d1", width, inner)
        self.relu = Relu()
        self.d2 = Dense(name + ".d2", inner, width)
        self.norm = L2Norm()

    def declare(self, params: ParameterSet) -> None:
        self.d1.declare(params)
        self.d2.declare(params)

    def bind(self, params: ParameterSet) -> None:
        self.d1.bind(params)
        self.d2.bind(params)

    def forward(self, x: np.ndarray) -> np.ndarray:
        t = self.d2.forward(self.relu.forward(self.d1.forward(x)))
        return self.norm.forward(x + t)

    def backward(self, dy: np.ndarray, grads: ParameterSet | None,
                 need_input_grad: bool = True) -> np.ndarray | None:
        ds = self.norm.backward(dy)
        dt = self.d1.backward(
            self.relu.backward(self.d2.backward(ds, grads)), grads, need_input_grad)
        if not need_input_grad:
            return None
        return ds + dt


class Network:
    """Shared trunk plus one linear head per named output.

    forward returns a dict {head name: output}; backward takes a dict of
    upstream gradients (heads may be omitted, meaning zero upstream) and
    accumulates parameter gradients into `grads`.
    """

    def __init__(self, trunk: list, heads: list[Dense], params: ParameterSet,
                 stack_shape: tuple[int, ...] = ()):
        self.trunk = trunk
        self.heads = {h.name: h for h in heads}
        self.params = params
        self.stack_shape = stack_shape
        self.passes = PassCounter()
        self._trunk_out: np.ndarray | None = None

    def bind(self, params: ParameterSet) -> None:
        for layer in self.trunk:
            if hasattr(layer, "bind"):
                layer.bind(params)
        for h in self.heads.values():
            h.bind(params)

    def forward(self, x: np.ndarray) -> dict[str, np.ndarray]:
        rows = int(np.prod(x.shape[:-1], dtype=np.int64)) if x.ndim > 1 else 1
        self.passes.forward += rows
        h = x
        for layer in self.trunk:
            h = layer.forward(h)
        self._trunk_out = h
        return {name: head.forward(h) for name, head in self.heads.items()}

    def backward(self, upstreams: dict[str, np.ndarray],
                 grads: ParameterSet | None,
                 need_input_grad: bool = False) -> np.ndarray | None:
        if self._trunk_out is None:
            raise UsageError("network backward before forward")
        if not upstreams:
            raise UsageError("network backward needs at least one head upstream")
        rows = None
        dtrunk = None
        for name, dy in upstreams.items():
            if rows is None:
                rows = int(np.prod(dy.shape[:-1], dtype=np.int64)) if dy.ndim > 1 else 1
            dh = self.heads[name].backward(dy, grads)
            dtrunk = dh if dtrunk is None else dtrunk + dh
        self.passes.backward += rows
        dx = dtrunk
        for i, layer in enumerate(reversed(self.trunk)):
            last = i == len(self.trunk) - 1
            need = need_input_grad or not last
            if isinstance(layer, (Dense, ResidualBlock)):
                dx = layer.backward(dx, grads, need_input_grad=need)
            else:
                dx = layer.backward(dx)
        return dx if need_input_grad else None

    def clear_cache(self) -> None:
        self._trunk_out = None


def _init_dense(params: ParameterSet, layer: Dense, rngs) -> None:
    """Scaled-uniform fan-in init, drawn per stack member from its own rng."""
    bound = 1.0 / np.sqrt(layer.in_dim)
    W = params.view(layer.name + ".W")
    b = params.view(layer.name + ".b")
    if params.stack_shape == ():
        W[...] = rngs.uniform(-bound, bound, W.shape)
        b[...] = rngs.uniform(-bound, bound, b.shape)
    else:
        for k, rng in enumerate(rngs):
            W[k] = rng.uniform(-bound, bound, W.shape[1:])
            b[k] = rng.uniform(-bound, bound, b.shape[1:])


def residual_net_structure(in_dim: int, hidden: int, blocks: int,
                           head_dims: dict[str, int]) -> tuple[list, list[Dense]]:
    """Fresh layer objects (trunk, heads) for the residual architecture,
    not yet bound to parameters."""
    trunk: list = [Dense("in", in_dim, hidden)]
    for i in range(blocks):
        trunk.append(ResidualBlock(f"block{i}", hidden, 2 * hidden))
    heads = [Dense(name, hidden, dim) for name, dim in head_dims.items()]
    return trunk, heads


def build_residual_net(in_dim: int, hidden: int, blocks: int,
                       head_dims: dict[str, int], rngs,
                       stack_shape: tuple[int, ...] = ()) -> Network:
    """Dense(in->h) trunk followed by `blocks` residual blocks of
    Dense(h->2h)/ReLU/Dense(2h->h)/skip/L2Norm, plus linear heads."""
    params = ParameterSet(stack_shape)
    trunk, heads = residual_net_structure(in_dim, hidden, blocks, head_dims)
    for layer in trunk:
        layer.declare(params)
    for h in heads:
        h.declare(params)
    params.freeze()
    net = Network(trunk, heads, params, stack_shape)
    net.bind(params)
    for layer in trunk:
        if isinstance(layer, Dense):
            _init_dense(params, layer, rngs)
        elif isinstance(layer, ResidualBlock):
            _init_dense(params, layer.d1, rngs)
            _init_dense(params, layer.d2, rngs)
    for h in heads:
        _init_dense(params, h, rngs)
    return net


def mlp_structure(in_dim: int, hidden: tuple[int, ...],
                  head_dims: dict[str, int]) -> tuple[list, list[Dense]]:
    """Fresh layer objects (trunk, heads) for the plain Dense/ReLU
    architecture, not yet bound to parameters."""
    trunk: list = []
    prev = in_dim
    for i, h in enumerate(hidden):
        trunk.append(Dense(f"fc{i}", prev, h))
        trunk.append(Relu())
        prev = h
    heads = [Dense(name, prev, dim) for name, dim in head_dims.items()]
    return trunk, heads


def build_mlp(in_dim: int, hidden: tuple[int, ...],
              head_dims: dict[str, int], rngs,
              stack_shape: tuple[int, ...] = ()) -> Network:
    """Plain Dense/ReLU trunk with linear heads (agent networks)."""
    params = ParameterSet(stack_shape)
    trunk, heads = mlp_structure(in_dim, hidden, head_dims)
    for layer in trunk:
        if isinstance(layer, Dense):
            layer.declare(params)
    for h in heads:
        h.declare(params)
    params.freeze()
    net = Network(trunk, heads, params, stack_shape)
    net.bind(params)
    for layer in trunk:
        if isinstance(layer, Dense):
            _init_dense(params, layer, rngs)
    for h in heads:
        _init_dense(params, h, rngs)
    return net
