"""Whole-model gradient audit and memory-trace replay, shared by the CLI and
the acceptance suite."""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from . import encoders, memory
from . import tensor as T
from .config import TrainConfig
from .errors import ConfigError
from .model import Model, triplet_loss
from .seeding import rng_for


def _tiny_vocab(size: int, word_dim: int, rng: np.random.Generator) -> encoders.Vocabulary:
    tokens = [f"tok{i}" for i in range(size)]
    table = T.Tensor(rng.standard_normal((size, word_dim)) * 0.1)
    return encoders.Vocabulary({t: i for i, t in enumerate(tokens)}, table)


def gradcheck_full_model(
    cfg: TrainConfig,
    variant: str = "semnet",
    feature_dim: int = 16,
    vocab_size: int = 12,
    h: float = 1e-4,
    max_entries_per_param: Optional[int] = None,
) -> tuple[float, float]:
    """Central-difference audit of the full forward + ranking loss.

    Two items are chained through the memory module so the write projection
    and (in soft mode) the attention parameters carry real gradients.
    Returns (max relative error, elapsed seconds). Forces float64.
    """
    cfg = TrainConfig(**{**cfg.__dict__, "dtype": "float64"})
    rng = rng_for(cfg.seed, "gradcheck")
    vocab = _tiny_vocab(vocab_size, cfg.word_dim, rng)
    model = Model(variant, cfg, feature_dim, vocab)

    num_items = 2
    frames = [rng.standard_normal((cfg.segments, feature_dim)) for _ in range(num_items)]
    docs = []
    for _ in range(num_items):
        sents = [[int(rng.integers(vocab_size)) for _ in range(4)] for _ in range(2)]
        docs.append(encoders.PlotDocument(sents))
    neg_docs = [docs[(i + 1) % num_items] for i in range(num_items)]

    proj = model.plot_projection()

    def f() -> T.Tensor:
        if variant == "semnet":
            model.mem_state = memory.reset(cfg.memory_slots, cfg.dim, policy="seeded_random", seed=cfg.seed)
        losses = []
        for i in range(num_items):
            emb = model.forward_video(frames[i], f"item{i}", training=False, mem_writes=(variant == "semnet"))
            pos = encoders.encode_plot(docs[i], vocab, proj)
            neg = encoders.encode_plot(neg_docs[i], vocab, proj)
            # shift into the hinge's active region so the max() kink cannot
            # sit at the evaluation point
            losses.append(triplet_loss(emb.vector, pos, neg, margin=2.5))
        return T.tmean(T.stack_rows(losses))

    start = time.perf_counter()
    err = T.grad_check(
        f,
        model.store,
        h=h,
        max_entries_per_param=max_entries_per_param,
        rng=rng_for(cfg.seed, "gradcheck_pick"),
    )
    return err, time.perf_counter() - start


def run_memtrace(
    dim: int = 8,
    slots: int = 8,
    steps: int = 32,
    seed: int = 0,
    read_mode: str = "hard",
    r_max: int = 0,
) -> list:
    """Drive the memory module with seeded random summaries; returns the
    per-cycle trace records."""
    if r_max >= slots:
        raise ConfigError(f"r_max {r_max} must be < slots {slots}")
    store = T.ParameterStore()
    rng = rng_for(seed, "memtrace_params")
    memory.register_params(store, dim, rng)
    state = memory.reset(slots, dim, policy="seeded_random", seed=seed)
    input_rng = rng_for(seed, "memtrace_inputs")
    offset_rng = rng_for(seed, "memtrace_offset")
    trace: list = []
    for _ in range(steps):
        summary = T.Tensor(input_rng.standard_normal(dim))
        memory.cycle(state, summary, store, mode=read_mode, rng=offset_rng, r_max=r_max, trace=trace)
    return trace
