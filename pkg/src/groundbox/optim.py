"""Parameter initialization and the Adam optimizer."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor


def xavier_init(shape: tuple[int, int], rng: np.random.Generator) -> Tensor:
    """Uniform init in +-sqrt(6/(fan_in+fan_out)) for a 2-D weight."""
    if len(shape) != 2:
        raise ValueError(f"xavier_init: expected 2-D shape, got {shape}")
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"xavier_init: zero dimension in {shape}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    values = rng.uniform(-bound, bound, size=shape)
    return Tensor(values, track_grad=True)


def zeros_init(shape, fill: float = 0.0) -> Tensor:
    """Constant-filled tracked tensor (biases)."""
    return Tensor(np.full(shape, fill, dtype=np.float64), track_grad=True)


class Adam:
    """Bias-corrected Adam over a fixed list of named parameters.

    The learning rate passed to :meth:`step` is the effective rate for
    that step; any decay schedule lives with the caller. Gradients are
    cleared after each update.
    """

    def __init__(self, params: list[Tensor], beta1: float = 0.9,
                 beta2: float = 0.99, epsilon: float = 1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError(f"adam: parameter {i} has no gradient")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
            p.grad = None

    def zero_grads(self) -> None:
        for p in self.params:
            p.grad = None
