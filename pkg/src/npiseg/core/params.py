"""Named trainable parameters, diagonal Gaussians, and the Adam update."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream
from .tensor import Tensor, backward

__all__ = ["ParamStore", "Gaussian", "AdamState", "adam_step", "evaluate_with_gradients"]


class ParamStore:
    """Uniquely named parameter tensors plus their gradient slots.

    A single store has a single writer (the training loop); frozen stores
    may be read concurrently from any number of forward passes.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._params: dict[str, Tensor] = {}
        self._init_rng = RngStream(seed).child("init")

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def names(self) -> list[str]:
        return sorted(self._params)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def linear(self, name: str, fan_in: int, fan_out: int, scale: float = 1.0) -> None:
        """He-style init for a bias-free weight matrix `name.w`."""
        gen = self._init_rng.child(name)
        w = gen.normal((fan_in, fan_out)) * (scale * np.sqrt(2.0 / fan_in))
        self.add(name + ".w", w)

    def dense(self, name: str, fan_in: int, fan_out: int, scale: float = 1.0) -> None:
        """He-style init for a weight matrix `name.w` and zero bias `name.b`."""
        self.linear(name, fan_in, fan_out, scale)
        self.add(name + ".b", np.zeros(fan_out))

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for name, t in self._params.items():
            out[name] = np.zeros_like(t.data) if t.grad is None else t.grad
        return out

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def cast_(self, dtype) -> None:
        """In-place dtype conversion (float32 serving mode)."""
        for t in self._params.values():
            t.data = t.data.astype(dtype)
            t.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            if name in self._params:
                if self._params[name].data.shape != value.shape:
                    raise ValueError(
                        f"shape mismatch for parameter '{name}': "
                        f"{self._params[name].data.shape} vs {value.shape}")
                self._params[name].data = np.asarray(value, dtype=np.float64)
            else:
                self.add(name, value)


@dataclass
class Gaussian:
    """Diagonal Gaussian with strictly positive stddev."""

    mean: Tensor
    stddev: Tensor

    def __post_init__(self):
        if self.mean.data.shape != self.stddev.data.shape:
            raise ValueError("mean and stddev must have the same shape")
        if np.any(self.stddev.data <= 0):
            raise ValueError("stddev must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.data.size


@dataclass
class AdamState:
    """First/second-moment accumulators for one ParamStore."""

    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamStore, state: AdamState) -> None:
    """One bias-corrected Adam update, in place, from the current gradients."""
    grads = {}
    for name in params.names():
        t = params[name]
        if t.grad is None:
            raise ValueError(f"missing gradient for parameter '{name}'")
        grads[name] = t.grad
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name in params.names():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        # asarray: 0-d arithmetic yields numpy scalars, which are immutable
        params[name].data = np.asarray(params[name].data - update)


def evaluate_with_gradients(graph_root: Tensor, params: ParamStore) -> dict[str, np.ndarray]:
    """Backpropagate from a scalar root and fill every gradient slot.

    Parameters that do not appear in the graph get a zero gradient.
    Raises on a non-scalar root or when a parameter gradient comes out
    non-finite.
    """
    if graph_root.data.shape != ():
        raise ValueError("graph root must be a scalar")
    params.zero_grads()
    backward(graph_root)
    for name in params.names():
        t = params[name]
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        elif not np.all(np.isfinite(t.grad)):
            raise FloatingPointError(f"NaN/Inf gradient for parameter '{name}'")
        else:
            t.grad = np.asarray(t.grad)
    return params.gradients()
