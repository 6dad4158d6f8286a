"""Optimizers over a ParameterStore."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .tensor import ParameterStore


def clip_grad_norm(store: ParameterStore, max_norm: float) -> float:
    """Scale all gradients down so their global L2 norm is at most max_norm."""
    total = 0.0
    for _, t in store.trainable_items():
        if t.grad is not None:
            total += float((t.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for _, t in store.trainable_items():
            if t.grad is not None:
                t.grad *= scale
    return norm


class Adam:
    def __init__(self, store: ParameterStore, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name, p in self.store.trainable_items():
            if p.grad is None:
                continue
            g = p.grad
            m = self._m.setdefault(name, np.zeros_like(p.data))
            v = self._v.setdefault(name, np.zeros_like(p.data))
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            p.data -= (self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)).astype(p.data.dtype)


class SGD:
    def __init__(self, store: ParameterStore, lr: float = 1e-2):
        self.store = store
        self.lr = lr

    def step(self) -> None:
        for _, p in self.store.trainable_items():
            if p.grad is not None:
                p.data -= (self.lr * p.grad).astype(p.data.dtype)


def make_optimizer(kind: str, store: ParameterStore, lr: float):
    if kind == "adam":
        return Adam(store, lr=lr)
    if kind == "sgd":
        return SGD(store, lr=lr)
    raise ConfigError(f"unknown optimizer {kind!r}")
