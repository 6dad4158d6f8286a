"""Feature-sequence I/O, corpus manifests, and the synthetic corpus generator.

The generator stands in for a real movie corpus: each genre gets a feature
template, a temporal modulation pattern and a token distribution; each item
additionally carries a latent topic that shows up in both its frames and its
plot tokens, so matching a video to its own plot (not just its genre) is
learnable. Everything is a pure function of the spec's seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import vsnt
from .errors import RangeError, SchemaError, StratificationError
from .seeding import rng_for

GENRE_NAMES = ["action", "comedy", "drama", "horror", "romance"]

# Synthetic-generator mixing weights, fixed after calibrating desk-scale
# learnability (genre probes, plot retrieval, rating probes).
TOPIC_DIM = 4
GENRE_TOPIC_OFFSET_SCALE = 0.42
MODULATION_SCALE = 1.0
TOPIC_FEATURE_SCALE = 1.0
GENRE_TOKEN_SCALE = 1.5
TOPIC_TOKEN_SCALE = 2.0
RATING_NOISE = 0.03


@dataclass
class FeatureSequence:
    frames: np.ndarray  # (T, F)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class CorpusItem:
    id: str
    features_path: Path
    plot_path: Path
    genre: str
    rating: float

    def load_features(self) -> FeatureSequence:
        return read_features(self.features_path)

    def load_plot_text(self) -> str:
        return Path(self.plot_path).read_text(encoding="utf-8")


@dataclass
class SyntheticSpec:
    num_items: int = 250
    num_genres: int = 5
    frames_per_item: int = 64
    feature_dim: int = 64
    vocab_size: int = 120
    sentences_per_plot: int = 20
    words_per_sentence: int = 24
    template_noise: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        for name in (
            "num_items",
            "num_genres",
            "frames_per_item",
            "feature_dim",
            "vocab_size",
            "sentences_per_plot",
            "words_per_sentence",
        ):
            if getattr(self, name) < 1:
                raise RangeError(f"synthetic spec field {name} must be positive")
        if self.template_noise < 0:
            raise RangeError("template_noise must be >= 0")


def sample_segments(num_frames: int, segments: int, mode: str, rng: Optional[np.random.Generator] = None) -> list[int]:
    """One frame index per segment; random within segment when training,
    segment midpoint when evaluating.

    Fewer frames than segments degrades to an evenly spread clamped ramp.
    """
    T, L = num_frames, segments
    if T < L:
        return [i * T // L for i in range(L)]
    out = []
    for i in range(L):
        start = i * T // L
        end = (i + 1) * T // L
        if mode == "train":
            out.append(int(rng.integers(start, end)))
        else:
            out.append(start + (end - start) // 2)
    return out


def write_features(seq: FeatureSequence, path) -> None:
    vsnt.write_tensors(path, {"features": seq.frames})


def read_features(path) -> FeatureSequence:
    return FeatureSequence(vsnt.read_single(path, "features", rank=2))


_MANIFEST_FIELDS = ("id", "features", "plot", "genre", "rating")


def load_manifest(path) -> list[CorpusItem]:
    path = Path(path)
    base = path.parent
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{ln}: invalid JSON: {exc}") from None
            for field in _MANIFEST_FIELDS:
                if field not in obj:
                    raise SchemaError(f"{path}:{ln}: missing field {field!r}")
            rating = float(obj["rating"])
            if not 1.0 <= rating <= 10.0:
                raise RangeError(f"{path}:{ln}: rating {rating} outside [1, 10]")
            fpath = base / obj["features"]
            ppath = base / obj["plot"]
            for ref in (fpath, ppath):
                if not ref.exists():
                    raise SchemaError(f"{path}:{ln}: referenced file {ref} does not exist")
            items.append(CorpusItem(str(obj["id"]), fpath, ppath, str(obj["genre"]), rating))
    return items


def _genre_names(count: int) -> list[str]:
    names = list(GENRE_NAMES[:count])
    names += [f"genre{i}" for i in range(len(names), count)]
    return names


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Write features, plot texts and a manifest; returns the manifest path."""
    spec.validate()
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    (out_dir / "plots").mkdir(parents=True, exist_ok=True)

    rng = rng_for(spec.seed, "synthetic")
    G, F, V, T = spec.num_genres, spec.feature_dim, spec.vocab_size, spec.frames_per_item
    topic_dim = TOPIC_DIM
    vocab = [f"w{i:03d}" for i in range(V)]
    genres = _genre_names(G)

    # Shared maps from the per-item latent topic into feature and token space.
    topic_to_feat = rng.normal(0.0, 1.0, size=(F, topic_dim)) / np.sqrt(topic_dim)
    topic_to_tok = rng.normal(0.0, 1.0, size=(V, topic_dim))

    # Genre templates: a mean offset living inside the topic subspace (so it
    # competes with topic variance instead of being trivially separable), a
    # low-frequency temporal modulation, and a token-logit profile. Offsets
    # sit on balanced hypercube corners (equal +1/-1 counts): pairwise
    # separation is uniform, so probe difficulty does not swing with the seed,
    # and each offset sums to zero, so genre does not bleed into the rating
    # (topic-mass) direction.
    corners = [c for c in range(2 ** topic_dim) if bin(c).count("1") == topic_dim // 2]
    genre_offsets = np.array(
        [
            [1.0 if (corners[g % len(corners)] >> b) & 1 else -1.0 for b in range(topic_dim)]
            for g in range(G)
        ]
    ) * GENRE_TOPIC_OFFSET_SCALE
    mu = genre_offsets @ topic_to_feat.T * TOPIC_FEATURE_SCALE
    mod_dir = rng.normal(0.0, 1.0, size=(G, F))
    mod_dir /= np.linalg.norm(mod_dir, axis=1, keepdims=True)
    mod_freq = 1 + np.arange(G) % 6  # distinct low frequencies per genre
    mod_phase = rng.uniform(0.0, 2 * np.pi, size=G)
    genre_logits = rng.normal(0.0, GENRE_TOKEN_SCALE, size=(G, V))

    t_grid = np.arange(T) / max(T, 1)
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as mf:
        for idx in range(spec.num_items):
            g = idx % G
            item_id = f"item{idx:04d}"
            topic = rng.uniform(0.0, 1.0, size=topic_dim)

            modulation = np.sin(2 * np.pi * mod_freq[g] * t_grid + mod_phase[g])
            frames = (
                mu[g][None, :]
                + MODULATION_SCALE * modulation[:, None] * mod_dir[g][None, :]
                + TOPIC_FEATURE_SCALE * (topic_to_feat @ topic)[None, :]
                + rng.normal(0.0, spec.template_noise, size=(T, F))
            )
            feat_rel = f"features/{item_id}.vsnt"
            write_features(FeatureSequence(frames.astype(np.float32)), out_dir / feat_rel)

            logits = genre_logits[g] + TOPIC_TOKEN_SCALE * (topic_to_tok @ (topic - 0.5))
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            sentences = []
            for _ in range(spec.sentences_per_plot):
                ids = rng.choice(V, size=spec.words_per_sentence, p=probs)
                sentences.append(" ".join(vocab[i] for i in ids))
            plot_rel = f"plots/{item_id}.txt"
            (out_dir / plot_rel).write_text(". ".join(sentences) + ".", encoding="utf-8")

            # Rating rides on the (non-negative) topic mass plus mild noise, so
            # it is learnable from embeddings but not identical to genre.
            q = topic.sum() / topic_dim + rng.normal(0.0, RATING_NOISE)
            rating = float(np.clip(1.0 + 9.0 * q, 1.0, 10.0))

            mf.write(
                json.dumps(
                    {
                        "id": item_id,
                        "features": feat_rel,
                        "plot": plot_rel,
                        "genre": genres[g],
                        "rating": round(rating, 3),
                    }
                )
                + "\n"
            )
    return manifest_path


def split_train_test(items: list[CorpusItem], fraction: float = 0.8, seed: int = 0):
    """Seeded, per-genre stratified split."""
    if not 0.0 < fraction < 1.0:
        raise RangeError(f"fraction {fraction} outside (0, 1)")
    if len(items) < 2:
        raise StratificationError("need at least 2 items to split")
    by_genre: dict[str, list[CorpusItem]] = {}
    for item in items:
        by_genre.setdefault(item.genre, []).append(item)
    rng = rng_for(seed, "split")
    train: list[CorpusItem] = []
    test: list[CorpusItem] = []
    for genre in sorted(by_genre):
        group = by_genre[genre]
        if len(group) < 2:
            raise StratificationError(f"genre {genre!r} has {len(group)} item(s); need >= 2 to stratify")
        order = rng.permutation(len(group))
        n_train = min(max(int(fraction * len(group) + 1e-9), 1), len(group) - 1)
        train.extend(group[i] for i in order[:n_train])
        test.extend(group[i] for i in order[n_train:])
    return train, test
