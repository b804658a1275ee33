"""Synthetic sensitive/safe corpora for benchmarks and tests.

Sensitive sentences carry a fixed number of marker tokens among background
tokens; safe sentences are background-only of the same length, so after a
good ranker redacts the markers the two corpora look alike.  A companion
embedding provider places all marker tokens near a common direction, which
lets a learned ranker generalize to marker types never seen in training;
a portion of the validation markers is drawn from such unseen types,
mirroring evaluation on held-out data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from redactrank.corpus import Corpus, PaddedBatch, Sentence
from redactrank.embed import BuiltinEmbedder, TokenEmbeddingBatch


class MarkerAlignedEmbedder:
    """Deterministic embedder that clusters marker tokens around one axis.

    Marker tokens map to unit vectors with a fixed cosine against a common
    direction; every other token gets the plain hash-seeded unit vector.
    """

    def __init__(self, dim: int, marker_tokens: frozenset[str],
                 alignment: float = 0.8, seed: int = 0):
        if not 0.0 < alignment < 1.0:
            raise ValueError("alignment must be in (0, 1)")
        self.dim = dim
        self.seed = seed
        self.alignment = alignment
        self.marker_tokens = frozenset(marker_tokens)
        self._base = BuiltinEmbedder(dim=dim, seed=seed)
        axis = BuiltinEmbedder(dim=dim, seed=seed + 1).vector("__marker_axis__")
        self.axis = axis
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, token: str) -> np.ndarray:
        v = self._cache.get(token)
        if v is not None:
            return v
        v = self._base.vector(token)
        if token in self.marker_tokens:
            perp = v - np.dot(v, self.axis) * self.axis
            norm = np.linalg.norm(perp)
            if norm < 1e-12:
                perp = np.zeros_like(v)
            else:
                perp /= norm
            v = self.alignment * self.axis + np.sqrt(1.0 - self.alignment ** 2) * perp
        self._cache[token] = v
        return v

    def __call__(self, batch: PaddedBatch) -> TokenEmbeddingBatch:
        b, w = len(batch), batch.width
        values = np.zeros((b, w, self.dim))
        for i, row in enumerate(batch.token_grid):
            for j, tok in enumerate(row):
                if batch.pad_mask[i][j]:
                    values[i, j] = self.vector(tok)
        return TokenEmbeddingBatch(values=values, pad_mask=np.array(batch.pad_mask))


@dataclass
class SyntheticBenchmark:
    """Train and validation corpus pairs plus their embedding provider."""

    train_sensitive: Corpus
    train_safe: Corpus
    valid_sensitive: Corpus
    valid_safe: Corpus
    marker_tokens: frozenset[str]
    provider: MarkerAlignedEmbedder


def _sensitive_sentence(rng: np.random.Generator, prefix: str, i: int,
                        background: list[str], markers: list[str],
                        background_per_sentence: int,
                        markers_per_sentence: int) -> Sentence:
    toks = list(rng.choice(background, size=background_per_sentence))
    toks += list(rng.choice(markers, size=markers_per_sentence))
    rng.shuffle(toks)
    return Sentence(id=f"{prefix}-{i}", tokens=tuple(toks))


def _safe_sentence(rng: np.random.Generator, prefix: str, i: int,
                   background: list[str], length: int) -> Sentence:
    toks = list(rng.choice(background, size=length))
    return Sentence(id=f"{prefix}-{i}", tokens=tuple(toks))


def make_benchmark(n_train: int = 2000, n_valid: int = 2000,
                   background_per_sentence: int = 10,
                   markers_per_sentence: int = 2,
                   background_vocab: int = 60,
                   train_marker_vocab: int = 20,
                   extra_marker_vocab: int = 10,
                   unseen_marker_rate: float = 0.5,
                   dim: int = 16, alignment: float = 0.8,
                   seed: int = 0) -> SyntheticBenchmark:
    """Build matched train/validation corpus pairs.

    Validation sensitive sentences draw each marker from the unseen pool
    with probability unseen_marker_rate, so lexical rankers trained on the
    training pair cannot recognize all validation markers while an
    embedding-based ranker can.
    """
    rng = np.random.default_rng(seed)
    background = [f"bg{i:03d}" for i in range(background_vocab)]
    train_markers = [f"mk{i:03d}" for i in range(train_marker_vocab)]
    extra_markers = [f"mx{i:03d}" for i in range(extra_marker_vocab)]
    all_markers = frozenset(train_markers + extra_markers)
    length = background_per_sentence + markers_per_sentence

    train_sensitive = Corpus("sensitive", [
        _sensitive_sentence(rng, "train-sens", i, background, train_markers,
                            background_per_sentence, markers_per_sentence)
        for i in range(n_train)
    ])
    train_safe = Corpus("safe", [
        _safe_sentence(rng, "train-safe", i, background, length)
        for i in range(n_train)
    ])

    valid_sensitive_sentences = []
    for i in range(n_valid):
        toks = list(rng.choice(background, size=background_per_sentence))
        for _ in range(markers_per_sentence):
            pool = extra_markers if rng.random() < unseen_marker_rate else train_markers
            toks.append(str(rng.choice(pool)))
        rng.shuffle(toks)
        valid_sensitive_sentences.append(
            Sentence(id=f"valid-sens-{i}", tokens=tuple(toks)))
    valid_sensitive = Corpus("sensitive", valid_sensitive_sentences)
    valid_safe = Corpus("safe", [
        _safe_sentence(rng, "valid-safe", i, background, length)
        for i in range(n_valid)
    ])

    provider = MarkerAlignedEmbedder(dim=dim, marker_tokens=all_markers,
                                     alignment=alignment, seed=seed)
    return SyntheticBenchmark(
        train_sensitive=train_sensitive, train_safe=train_safe,
        valid_sensitive=valid_sensitive, valid_safe=valid_safe,
        marker_tokens=all_markers, provider=provider,
    )


def marker_positions(sentence: Sentence, markers: frozenset[str]) -> set[int]:
    """Indices of marker tokens within a sentence."""
    return {i for i, t in enumerate(sentence.tokens) if t in markers}
