"""Model variants (SSM / SLM / SemNet), the ranking loss, training loop,
corpus embedding and retrieval evaluation."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import encoders, memory, optim, semantic, vsnt
from . import tensor as T
from .config import TrainConfig
from .corpus import CorpusItem, sample_segments
from .errors import ConfigError, ContractError, DimensionError, RangeError
from .seeding import rng_for

log = logging.getLogger("videosemnet")

COSINE_EPS = 1e-8  # training-time guard; strict-mode cosine lives in tensor_core


@dataclass
class VideoEmbedding:
    vector: T.Tensor
    variant: str
    item_id: str


def triplet_loss(video: T.Tensor, positive: T.Tensor, negative: T.Tensor, margin: float, eps: float = 0.0) -> T.Tensor:
    """Hinge on the cosine gap: max(0, s(v, neg) - s(v, pos) + margin)."""
    s_pos = T.cosine_similarity(video, positive, eps=eps)
    s_neg = T.cosine_similarity(video, negative, eps=eps)
    return T.relu(T.add(T.add(s_neg, T.mul(s_pos, -1.0)), margin))


class Model:
    """A variant plus everything it needs to run: parameters, vocabulary,
    batchnorm state, and (for SemNet) memory state."""

    def __init__(self, variant: str, cfg: TrainConfig, feature_dim: int, vocab: encoders.Vocabulary):
        if variant not in ("ssm", "slm", "semnet"):
            raise ConfigError(f"unknown variant {variant!r}")
        cfg.validate()
        self.variant = variant
        self.cfg = cfg
        self.feature_dim = feature_dim
        self.vocab = vocab
        self.dtype = np.float32 if cfg.dtype == "float32" else np.float64
        self.store = T.ParameterStore()
        self.bn_state = T.BatchNormState(feature_dim, dtype=np.float64)
        self.mem_state: Optional[memory.MemoryState] = None

        rng = rng_for(cfg.seed, "params", variant)
        d, dw, F = cfg.dim, cfg.word_dim, feature_dim

        gamma = T.Tensor(np.ones(F, dtype=self.dtype), requires_grad=True)
        self.store.add("bn_gamma", gamma, init="ones")
        self.store.create("bn_beta", (F,), rng, scale=0.0, dtype=self.dtype)

        vocab.embeddings.data = vocab.embeddings.data.astype(self.dtype)
        self.store.add("word_embeddings", vocab.embeddings, init="normal(scale=0.1)")
        if dw != d:
            self.store.create("plot_proj", (d, dw), rng, scale=1.0 / np.sqrt(dw), dtype=self.dtype)

        if variant == "ssm":
            self.conv_cfg = None
            self.store.create("ssm_proj", (d, F), rng, scale=1.0 / np.sqrt(F), dtype=self.dtype)
        else:
            self.conv_cfg = semantic.ConvStackConfig(
                in_dim=F, layers=[(cfg.conv_hidden, cfg.kernel_size), (d, cfg.kernel_size)]
            )
            self.conv_cfg.register(self.store, rng, dtype=self.dtype)
            self.store.create("descriptors", (cfg.descriptors, d), rng, scale=1.0, dtype=self.dtype)
            self.store.create(
                "desc_recurrence",
                (cfg.descriptors, d + cfg.descriptors),
                rng,
                scale=1.0 / np.sqrt(d + cfg.descriptors),
                dtype=self.dtype,
            )
        if variant == "semnet":
            memory.register_params(self.store, d, rng, dtype=self.dtype)
            fusion = self.store.create("fusion_proj", (d, 2 * d), rng, scale=1.0 / np.sqrt(2 * d), dtype=self.dtype)
            # Start the fusion nearly summary-driven: the memory-read half is
            # down-weighted at init so its early (untrained) reads do not drown
            # the summary signal; training grows it back where it helps.
            fusion.data[:, d:] *= 0.1

    # -- forward pieces ------------------------------------------------

    def reset_memory(self) -> None:
        self.mem_state = memory.reset(
            self.cfg.memory_slots, self.cfg.dim, policy=self.cfg.memory_reset, seed=self.cfg.seed, dtype=self.dtype
        )

    def plot_projection(self) -> Optional[T.Tensor]:
        return self.store["plot_proj"] if "plot_proj" in self.store else None

    def encode_plot_text(self, text: str) -> T.Tensor:
        doc = encoders.PlotDocument.from_text(text, self.vocab)
        return encoders.encode_plot(doc, self.vocab, self.plot_projection())

    def forward_video(
        self,
        frames: np.ndarray,
        item_id: str,
        training: bool,
        seg_rng: Optional[np.random.Generator] = None,
        mem_rng: Optional[np.random.Generator] = None,
        mem_writes: Optional[bool] = None,
        trace: Optional[list] = None,
    ) -> VideoEmbedding:
        """Single-item forward. Batchnorm here uses running statistics; the
        training loop normalizes whole minibatches of snippets instead (a
        per-item batch would cancel exactly the time-constant signal)."""
        cfg = self.cfg
        mode = "train" if training else "eval"
        idxs = sample_segments(frames.shape[0], cfg.segments, mode, rng=seg_rng)
        x = T.Tensor(frames[idxs].astype(self.dtype))
        x = T.batchnorm(x, self.store["bn_gamma"], self.store["bn_beta"], self.bn_state, training=False)
        return self.forward_normalized(
            x, item_id, training=training, mem_rng=mem_rng, mem_writes=mem_writes, trace=trace
        )

    def forward_normalized(
        self,
        x: T.Tensor,
        item_id: str,
        training: bool,
        mem_rng: Optional[np.random.Generator] = None,
        mem_writes: Optional[bool] = None,
        trace: Optional[list] = None,
    ) -> VideoEmbedding:
        cfg = self.cfg
        if self.variant == "ssm":
            vec = T.matmul(self.store["ssm_proj"], T.tmean(x, axis=0))
            return VideoEmbedding(vec, self.variant, item_id)

        hidden = semantic.conv_stack_forward(x, self.conv_cfg, self.store, act=cfg.activation)
        bank = semantic.DescriptorBank(self.store["descriptors"])
        summary, _ = semantic.summarize(hidden, bank, self.store["desc_recurrence"])
        if self.variant == "slm":
            return VideoEmbedding(summary, self.variant, item_id)

        if self.mem_state is None:
            raise ContractError("SemNet forward requires a memory state; call reset_memory() first")
        if mem_writes is None:
            mem_writes = training or cfg.eval_memory_writes
        v = memory.cycle(
            self.mem_state,
            summary,
            self.store,
            mode=cfg.read_mode,
            write_enabled=mem_writes,
            rng=mem_rng,
            r_max=cfg.r_max,
            trace=trace,
        )
        fused = T.tanh(T.matmul(self.store["fusion_proj"], T.concat([summary, v])))
        return VideoEmbedding(fused, self.variant, item_id)

    # -- persistence ---------------------------------------------------

    def save_checkpoint(self, path, epoch: int, config_hash: str = "") -> None:
        path = Path(path)
        entries = {name: t.data for name, t in self.store.items()}
        entries["bn_running_mean"] = self.bn_state.mean
        entries["bn_running_var"] = self.bn_state.var
        vsnt.write_tensors(path, entries)
        sidecar = {
            "variant": self.variant,
            "dims": {
                "feature_dim": self.feature_dim,
                "vocab_size": self.vocab.size,
                **{f.name: getattr(self.cfg, f.name) for f in dataclasses.fields(self.cfg)},
            },
            "vocab_tokens": sorted(self.vocab.token_to_id, key=self.vocab.token_to_id.get),
            "config_hash": config_hash,
            "epoch": epoch,
            "timestamp": time.time(),
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")

    @classmethod
    def load_checkpoint(cls, path) -> "Model":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
        dims = sidecar["dims"]
        cfg_fields = {f.name for f in dataclasses.fields(TrainConfig)}
        cfg = TrainConfig(**{k: v for k, v in dims.items() if k in cfg_fields})
        entries = vsnt.read_tensors(path)
        tokens = sidecar["vocab_tokens"]
        vocab = encoders.Vocabulary(
            {tok: i for i, tok in enumerate(tokens)}, T.Tensor(entries["word_embeddings"]), source="loaded"
        )
        model = cls(sidecar["variant"], cfg, dims["feature_dim"], vocab)
        for name, tensor in model.store.items():
            if name not in entries:
                raise DimensionError(f"checkpoint {path} is missing parameter {name!r}")
            if entries[name].shape != tensor.data.shape:
                raise DimensionError(
                    f"checkpoint {path}: parameter {name!r} has shape {entries[name].shape}, expected {tensor.data.shape}"
                )
            tensor.data = entries[name].astype(model.dtype)
        model.bn_state.mean = entries["bn_running_mean"].astype(np.float64)
        model.bn_state.var = entries["bn_running_var"].astype(np.float64)
        return model


# -- training ----------------------------------------------------------


@dataclass
class TrainResult:
    checkpoint_path: Path
    curve_path: Path
    epoch_losses: list


def _batches(order: np.ndarray, batch_size: int):
    """Contiguous chunks; a trailing singleton is folded into the previous
    batch so every batch can draw an in-batch negative."""
    chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train(
    items: list[CorpusItem],
    cfg: TrainConfig,
    variant: str,
    out_dir,
    vocab_items: Optional[list[CorpusItem]] = None,
    config_hash: str = "",
) -> TrainResult:
    cfg.validate()
    if len(items) < 2:
        raise RangeError("training needs at least 2 items (in-batch negatives)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab_source = vocab_items if vocab_items is not None else items
    token_lists = []
    for item in vocab_source:
        for sent in encoders.split_sentences(item.load_plot_text()):
            token_lists.append(sent)
    vocab = encoders.Vocabulary.build(token_lists, cfg.word_dim, rng_for(cfg.seed, "vocab"))

    frames = [item.load_features().frames for item in items]
    feature_dim = frames[0].shape[1]
    plots = [
        encoders.PlotDocument.from_text(item.load_plot_text(), vocab) for item in items
    ]

    model = Model(variant, cfg, feature_dim, vocab)
    optimizer = optim.make_optimizer(cfg.optimizer, model.store, cfg.learning_rate)
    shuffle_rng = rng_for(cfg.seed, "shuffle")
    seg_rng = rng_for(cfg.seed, "segments")
    neg_rng = rng_for(cfg.seed, "negatives")
    mem_rng = rng_for(cfg.seed, "memory_offset")
    proj = model.plot_projection()

    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        if variant == "semnet":
            model.reset_memory()
        order = shuffle_rng.permutation(len(items))
        total, count = 0.0, 0
        for batch in _batches(order, cfg.batch_size):
            model.store.zero_grads()
            plot_vecs = {int(i): encoders.encode_plot(plots[i], vocab, proj) for i in batch}
            # Normalize the whole minibatch of snippets in one call so that
            # per-item (time-constant) signal survives standardization.
            L = cfg.segments
            sampled = [
                frames[int(i)][sample_segments(frames[int(i)].shape[0], L, "train", rng=seg_rng)]
                for i in batch
            ]
            x = T.Tensor(np.concatenate(sampled).astype(model.dtype))
            xhat = T.batchnorm(x, model.store["bn_gamma"], model.store["bn_beta"], model.bn_state, training=True)
            losses = []
            for n, i in enumerate(batch):
                i = int(i)
                xi = T.rows_slice(xhat, n * L, (n + 1) * L)
                emb = model.forward_normalized(xi, items[i].id, training=True, mem_rng=mem_rng)
                others = [int(j) for j in batch if int(j) != i]
                neg = int(others[neg_rng.integers(len(others))])
                losses.append(
                    triplet_loss(emb.vector, plot_vecs[i], plot_vecs[neg], cfg.margin, eps=COSINE_EPS)
                )
            batch_loss = T.tmean(T.stack_rows(losses))
            batch_loss.backward()
            optim.clip_grad_norm(model.store, cfg.grad_clip)
            optimizer.step()
            if model.mem_state is not None:
                model.mem_state.detach()
            total += float(batch_loss.data) * len(batch)
            count += len(batch)
        epoch_losses.append(total / count)
        if epoch == 0 or (epoch + 1) % 10 == 0:
            log.info("epoch %d/%d mean loss %.5f", epoch + 1, cfg.epochs, epoch_losses[-1])

    curve_path = out_dir / "loss_curve.csv"
    with open(curve_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for e, loss in enumerate(epoch_losses):
            fh.write(f"{e},{loss:.8f}\n")
    checkpoint_path = out_dir / f"{variant}.vsnt"
    model.save_checkpoint(checkpoint_path, epoch=cfg.epochs, config_hash=config_hash)
    return TrainResult(checkpoint_path, curve_path, epoch_losses)


# -- inference ---------------------------------------------------------


def embed_corpus(items: list[CorpusItem], model: Model, out_path=None) -> np.ndarray:
    """Deterministic eval-mode embeddings for every item, in manifest order."""
    if model.variant == "semnet":
        model.reset_memory()
    rows = []
    for item in items:
        emb = model.forward_video(item.load_features().frames, item.id, training=False)
        rows.append(emb.vector.data.astype(np.float64))
    out = np.stack(rows)
    if out_path is not None:
        vsnt.write_tensors(out_path, {"embeddings": out})
    return out


def encode_plots(items: list[CorpusItem], model: Model) -> np.ndarray:
    proj = model.plot_projection()
    rows = []
    for item in items:
        doc = encoders.PlotDocument.from_text(item.load_plot_text(), model.vocab)
        rows.append(encoders.encode_plot(doc, model.vocab, proj).data.astype(np.float64))
    return np.stack(rows)


def retrieval_eval(embeddings: np.ndarray, plot_vecs: np.ndarray, k: int) -> float:
    """Fraction of videos whose own plot ranks in the cosine top-k."""
    n = embeddings.shape[0]
    if plot_vecs.shape[0] != n:
        raise DimensionError("embedding/plot counts differ")
    if not 1 <= k <= n:
        raise RangeError(f"k={k} outside [1, {n}]")
    e = embeddings / np.maximum(np.linalg.norm(embeddings, axis=1, keepdims=True), 1e-12)
    p = plot_vecs / np.maximum(np.linalg.norm(plot_vecs, axis=1, keepdims=True), 1e-12)
    sims = e @ p.T
    own = np.diag(sims)
    # rank = number of other plots scoring strictly higher than the true one
    rank = (sims > own[:, None]).sum(axis=1)
    return float((rank < k).mean())
