"""Neural semantic learner: temporal conv stack plus the recurrent
descriptor-attention summarizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError


@dataclass
class ConvStackConfig:
    """layers is a list of (filter_count, kernel_size); the last filter count
    is the model dimension d."""

    in_dim: int
    layers: list = field(default_factory=lambda: [(128, 3), (32, 3)])

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("conv stack needs at least one layer")
        for filters, kernel in self.layers:
            if kernel % 2 == 0:
                raise ConfigError(f"kernel size must be odd, got {kernel}")
            if filters < 1:
                raise ConfigError("filter count must be positive")

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def min_input_length(self) -> int:
        return 2 ** self.num_layers

    def output_steps(self, length: int) -> int:
        return length // (2 ** self.num_layers)

    def register(self, store: T.ParameterStore, rng: np.random.Generator, dtype=np.float64) -> None:
        c_in = self.in_dim
        for i, (filters, kernel) in enumerate(self.layers):
            scale = 1.0 / np.sqrt(kernel * c_in)
            store.create(f"conv{i}_w", (kernel, c_in, filters), rng, scale=scale, dtype=dtype)
            store.create(f"conv{i}_b", (filters,), rng, scale=0.0, dtype=dtype)
            c_in = filters


def conv_stack_forward(x: T.Tensor, cfg: ConvStackConfig, store: T.ParameterStore, act: str = "relu") -> T.Tensor:
    """conv -> activation -> halving max-pool, per layer."""
    L = x.data.shape[0]
    if L < cfg.min_input_length():
        raise ConfigError(
            f"input length {L} too short for {cfg.num_layers} pooling layers; need >= {cfg.min_input_length()}"
        )
    h = x
    for i in range(cfg.num_layers):
        h = T.conv1d(h, store[f"conv{i}_w"], store[f"conv{i}_b"])
        h = T.activation(h, act)
        h = T.maxpool1d(h, window=2)
    return h


@dataclass
class DescriptorBank:
    bank: T.Tensor  # (N_D, d)

    @property
    def count(self) -> int:
        return self.bank.data.shape[0]

    @property
    def dim(self) -> int:
        return self.bank.data.shape[1]


def descriptor_step(h: T.Tensor, r_prev: T.Tensor, weight: T.Tensor) -> T.Tensor:
    """One recurrence step: softmax(weight @ [h; r_prev])."""
    d = h.data.shape[0]
    nd = r_prev.data.shape[0]
    if weight.data.shape != (nd, d + nd):
        raise DimensionError(f"recurrence weight shape {weight.data.shape} != ({nd}, {d + nd})")
    return T.softmax(T.matmul(weight, T.concat([h, r_prev])))


def summarize(hidden: T.Tensor, bank: DescriptorBank, weight: T.Tensor):
    """Run the recurrence over all time steps.

    Returns the final semantic summary (a convex combination of descriptor
    rows) and the full weight trajectory for inspection.
    """
    steps = hidden.data.shape[0]
    if steps < 1:
        raise DimensionError("summarize needs at least one time step")
    bank_t = T.transpose(bank.bank)
    r = T.Tensor(np.zeros(bank.count, dtype=hidden.data.dtype))
    s = None
    trajectory = []
    for t in range(steps):
        r = descriptor_step(T.row(hidden, t), r, weight)
        trajectory.append(r)
        s = T.matmul(bank_t, r)
    return s, T.stack_rows(trajectory)
