"""External memory: additive-attention read head, controller context, and the
age-driven least-recently-written update rule."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .seeding import rng_for

PARAM_NAMES = (
    "mem_att_summary",
    "mem_att_context",
    "mem_att_memory",
    "mem_att_score",
    "mem_ctx_context",
    "mem_ctx_read",
    "mem_ctx_summary",
    "mem_write_proj",
)


def register_params(store: T.ParameterStore, dim: int, rng: np.random.Generator, dtype=np.float64) -> None:
    scale = 1.0 / np.sqrt(dim)
    for name in PARAM_NAMES:
        shape = (dim,) if name == "mem_att_score" else (dim, dim)
        store.create(name, shape, rng, scale=scale, dtype=dtype)


@dataclass
class MemoryState:
    matrix: T.Tensor  # (m, d)
    ages: np.ndarray  # (m,) ints
    context: T.Tensor  # (d,)
    step_counter: int = 0

    @property
    def slots(self) -> int:
        return self.matrix.data.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.data.shape[1]

    def detach(self) -> None:
        """Cut graph history (used between optimizer steps)."""
        self.matrix = self.matrix.detach()
        self.context = self.context.detach()


def reset(slots: int, dim: int, policy: str = "zero", seed: int = 0, dtype=np.float64) -> MemoryState:
    if policy == "zero":
        m = np.zeros((slots, dim), dtype=dtype)
    elif policy == "seeded_random":
        m = (rng_for(seed, "memory_reset").standard_normal((slots, dim)) * 0.01).astype(dtype)
    else:
        raise ConfigError(f"unknown reset policy {policy!r}")
    return MemoryState(
        matrix=T.Tensor(m),
        ages=np.zeros(slots, dtype=np.int64),
        context=T.Tensor(np.zeros(dim, dtype=dtype)),
        step_counter=0,
    )


def read(state: MemoryState, summary: T.Tensor, store: T.ParameterStore, mode: str = "hard"):
    """Attention over memory rows; returns (read vector, read weights).

    Ages of every location are incremented as part of the read step.
    """
    if mode not in ("hard", "soft"):
        raise ConfigError(f"read mode must be hard or soft, got {mode!r}")
    base = T.add(
        T.matmul(store["mem_att_summary"], summary),
        T.matmul(store["mem_att_context"], state.context),
    )
    # (m, d): one attention pre-activation per memory row.
    pre = T.add(T.matmul(state.matrix, T.transpose(store["mem_att_memory"])), base)
    scores = T.matmul(T.tanh(pre), store["mem_att_score"])
    weights = T.softmax(scores)
    if mode == "hard":
        j = int(np.argmax(weights.data))  # argmax ties resolve to lowest index
        v = T.row(state.matrix, j)
    else:
        v = T.matmul(T.transpose(state.matrix), weights)
    state.ages += 1
    return v, weights


def update_context(state: MemoryState, v: T.Tensor, summary: T.Tensor, store: T.ParameterStore) -> T.Tensor:
    new_c = T.tanh(
        T.add(
            T.add(
                T.matmul(store["mem_ctx_context"], state.context),
                T.matmul(store["mem_ctx_read"], v),
            ),
            T.matmul(store["mem_ctx_summary"], summary),
        )
    )
    state.context = new_c
    return new_c


def write(state: MemoryState, store: T.ParameterStore, rng: Optional[np.random.Generator] = None, r_max: int = 0) -> int:
    """Overwrite the oldest location (plus optional random offset) with a
    projection of the controller context; its age drops to 0."""
    m = state.slots
    if r_max >= m:
        raise ConfigError(f"r_max {r_max} must be < memory size {m}")
    offset = 0
    if r_max > 0:
        if rng is None:
            raise ConfigError("r_max > 0 requires an rng")
        offset = int(rng.integers(0, r_max + 1))
    p = (int(np.argmax(state.ages)) + offset) % m
    state.matrix = T.set_row(state.matrix, p, T.matmul(store["mem_write_proj"], state.context))
    state.ages[p] = 0
    state.step_counter += 1
    return p


@dataclass
class CycleRecord:
    step: int
    read_index: Optional[int]
    read_weights: Optional[list]
    write_index: Optional[int]
    ages: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "read_index": self.read_index,
                "read_weights": self.read_weights,
                "write_index": self.write_index,
                "ages": self.ages,
            }
        )


def cycle(
    state: MemoryState,
    summary: T.Tensor,
    store: T.ParameterStore,
    mode: str = "hard",
    write_enabled: bool = True,
    rng: Optional[np.random.Generator] = None,
    r_max: int = 0,
    trace: Optional[list] = None,
) -> T.Tensor:
    """One full read -> context update -> (optional) write; returns the read
    vector used by the fusion layer."""
    v, weights = read(state, summary, store, mode=mode)
    update_context(state, v, summary, store)
    p = write(state, store, rng=rng, r_max=r_max) if write_enabled else None
    if trace is not None:
        trace.append(
            CycleRecord(
                step=state.step_counter,
                read_index=int(np.argmax(weights.data)) if mode == "hard" else None,
                read_weights=None if mode == "hard" else [float(w) for w in weights.data],
                write_index=p,
                ages=[int(a) for a in state.ages],
            )
        )
    return v


def dump_trace(records: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def load_trace(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
