"""Positional encoding and the two-level plot-summary encoder.

A plot summary is encoded sentence by sentence with an order-sensitive
positional weighting, and the sentence vectors are then combined with the
same weighting, giving a single vector per document.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError, EmptyInputError, VocabularyError

_SENTENCE_SPLIT = re.compile(r"[.!?]")
_PUNCT_STRIP = re.compile(r"^\W+|\W+$")


def split_sentences(text: str) -> list[list[str]]:
    """Sentences split on ./!/?, tokens lowercased with edge punctuation stripped."""
    sentences = []
    for raw in _SENTENCE_SPLIT.split(text):
        tokens = []
        for word in raw.split():
            word = _PUNCT_STRIP.sub("", word.lower())
            if word:
                tokens.append(word)
        if tokens:
            sentences.append(tokens)
    return sentences


@dataclass
class Vocabulary:
    token_to_id: dict
    embeddings: T.Tensor  # (V, d_w)
    source: str = "trained"

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    @property
    def word_dim(self) -> int:
        return self.embeddings.data.shape[1]

    def ids(self, tokens: list[str]) -> list[int]:
        try:
            return [self.token_to_id[t] for t in tokens]
        except KeyError as exc:
            raise VocabularyError(f"unknown token {exc.args[0]!r}") from None

    @classmethod
    def build(cls, token_lists, word_dim: int, rng: np.random.Generator, dtype=np.float64) -> "Vocabulary":
        """Collect every token (sorted for determinism) and draw embeddings."""
        seen = set()
        for tokens in token_lists:
            seen.update(tokens)
        mapping = {tok: i for i, tok in enumerate(sorted(seen))}
        table = T.Tensor((rng.standard_normal((len(mapping), word_dim)) * 0.1).astype(dtype))
        return cls(mapping, table, source="trained")

    @classmethod
    def from_embedding_file(cls, path, dtype=np.float64) -> "Vocabulary":
        """Load "token v1 v2 ... v_dw" lines."""
        mapping = {}
        rows = []
        dim = None
        with open(path, "r", encoding="utf-8") as fh:
            for ln, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                tok, vals = parts[0], parts[1:]
                if dim is None:
                    dim = len(vals)
                    if dim < 1:
                        raise ConfigError(f"{path}:{ln}: no embedding values")
                elif len(vals) != dim:
                    raise ConfigError(f"{path}:{ln}: expected {dim} values, got {len(vals)}")
                if tok in mapping:
                    raise ConfigError(f"{path}:{ln}: duplicate token {tok!r}")
                mapping[tok] = len(rows)
                rows.append([float(v) for v in vals])
        if not rows:
            raise ConfigError(f"{path}: empty embedding file")
        return cls(mapping, T.Tensor(np.asarray(rows, dtype=dtype)), source="loaded")


@dataclass
class PlotDocument:
    sentences: list  # list of token-id lists
    embedding: Optional[T.Tensor] = field(default=None)

    def validate(self, vocab_size: int) -> None:
        if not self.sentences:
            raise EmptyInputError("plot document has no sentences")
        for sent in self.sentences:
            if not sent:
                raise EmptyInputError("plot document contains an empty sentence")
            for tid in sent:
                if not 0 <= tid < vocab_size:
                    raise VocabularyError(f"token id {tid} outside vocabulary of size {vocab_size}")

    @classmethod
    def from_text(cls, text: str, vocab: Vocabulary) -> "PlotDocument":
        sentences = split_sentences(text)
        if not sentences:
            raise EmptyInputError("plot text contains no tokens")
        return cls([vocab.ids(toks) for toks in sentences])


def position_weights(length: int, dim: int, dtype=np.float64) -> np.ndarray:
    """The (length, dim) coefficient matrix; j and k are 1-indexed."""
    if length < 1 or dim < 1:
        raise ConfigError("position_weights needs length >= 1 and dim >= 1")
    j = np.arange(1, length + 1, dtype=np.float64)[:, None]
    k = np.arange(1, dim + 1, dtype=np.float64)[None, :]
    w = (1.0 - j / length) - (k / dim) * (1.0 - 2.0 * j / length)
    return w.astype(dtype)


def positional_encode(elements: T.Tensor) -> T.Tensor:
    """Order-sensitive weighted sum over the rows of a (length, dim) tensor."""
    elements = T.as_tensor(elements)
    if elements.data.ndim != 2 or elements.data.shape[0] < 1:
        raise EmptyInputError("positional_encode needs a non-empty (length, dim) input")
    length, dim = elements.data.shape
    weights = position_weights(length, dim, dtype=elements.data.dtype)
    return T.tsum(T.mul(elements, T.Tensor(weights)), axis=0)


def encode_plot(doc: PlotDocument, vocab: Vocabulary, proj: Optional[T.Tensor] = None) -> T.Tensor:
    """Two-level encoding: words within each sentence, then the sentence vectors.

    proj maps the word dimension to the model dimension; None means identity
    (word dim must already equal the model dim).
    """
    doc.validate(vocab.size)
    sentence_vecs = []
    for sent in doc.sentences:
        words = T.gather_rows(vocab.embeddings, sent)
        sentence_vecs.append(positional_encode(words))
    encoded = positional_encode(T.stack_rows(sentence_vecs))
    if proj is not None:
        encoded = T.matmul(proj, encoded)
    doc.embedding = encoded
    return encoded


def encode_plot_bruteforce(sentences: list, table: np.ndarray) -> np.ndarray:
    """Independent double-loop evaluation of the two-level encoding (oracle)."""
    d = table.shape[1]
    sent_vecs = []
    for sent in sentences:
        L = len(sent)
        f = np.zeros(d)
        for j, tid in enumerate(sent, start=1):
            for k in range(1, d + 1):
                l_jk = (1 - j / L) - (k / d) * (1 - 2 * j / L)
                f[k - 1] += l_jk * table[tid, k - 1]
        sent_vecs.append(f)
    S = len(sent_vecs)
    out = np.zeros(d)
    for j, vec in enumerate(sent_vecs, start=1):
        for k in range(1, d + 1):
            l_jk = (1 - j / S) - (k / d) * (1 - 2 * j / S)
            out[k - 1] += l_jk * vec[k - 1]
    return out
