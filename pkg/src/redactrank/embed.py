"""Per-token embedding providers and mean pooling.

An embedding provider turns a padded batch into a B x W x d array with
zero vectors at pad positions.  Two providers ship here: a deterministic
built-in embedder (a stand-in for an external sentence-transformer) and a
file-backed provider for precomputed contextual embeddings.  No gradient
ever flows into a provider; embeddings are frozen inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from redactrank.corpus import CorpusFormatError, PaddedBatch


@dataclass
class TokenEmbeddingBatch:
    """B x W x d token embeddings with the batch's pad mask."""

    values: np.ndarray   # (B, W, d) float64, zeros at pads
    pad_mask: np.ndarray  # (B, W) bool, True = real token

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.pad_mask = np.asarray(self.pad_mask, dtype=bool)
        if self.values.ndim != 3:
            raise ValueError("embedding values must be B x W x d")
        if self.values.shape[:2] != self.pad_mask.shape:
            raise ValueError("pad mask shape does not match embeddings")
        if self.dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embeddings contain non-finite values")
        if np.any(self.values[~self.pad_mask] != 0.0):
            raise ValueError("pad positions must hold zero vectors")

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def _token_vector(token: str, seed: int, dim: int) -> np.ndarray:
    """Fixed unit-norm vector for a token: hash-seeded standard normals."""
    digest = hashlib.blake2b(
        f"{seed}\x1f{token}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


class BuiltinEmbedder:
    """Deterministic per-token embedder; same (token, seed, dim) -> same vector."""

    def __init__(self, dim: int, seed: int = 0):
        if dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, token: str) -> np.ndarray:
        v = self._cache.get(token)
        if v is None:
            v = _token_vector(token, self.seed, self.dim)
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


def builtin_embed(batch: PaddedBatch, dim: int, seed: int = 0) -> TokenEmbeddingBatch:
    """One-shot form of BuiltinEmbedder for a single batch."""
    return BuiltinEmbedder(dim=dim, seed=seed)(batch)


class FileEmbeddingProvider:
    """Precomputed contextual embeddings, read once from JSON-lines.

    Each record is {"id": str, "tokens": [str...], "embeddings": [[float...]...]}
    with one vector per token and a uniform vector length across the file.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.dim = 0
        self._records: dict[str, tuple[list[str], np.ndarray]] = {}
        self._load()

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusFormatError(
                        f"{self.path}: malformed JSON on line {lineno}: {exc}"
                    ) from exc
                try:
                    sid = obj["id"]
                    tokens = list(obj["tokens"])
                    vectors = np.asarray(obj["embeddings"], dtype=np.float64)
                except (KeyError, TypeError, ValueError) as exc:
                    raise CorpusFormatError(
                        f"{self.path}: line {lineno} needs 'id', 'tokens' and "
                        f"'embeddings' ({exc})"
                    ) from exc
                if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
                    raise CorpusFormatError(
                        f"{self.path}: token-count mismatch for id {sid!r}: "
                        f"{len(tokens)} tokens vs {0 if vectors.ndim != 2 else vectors.shape[0]} vectors"
                    )
                if not np.all(np.isfinite(vectors)):
                    raise CorpusFormatError(
                        f"{self.path}: non-finite embedding for id {sid!r}"
                    )
                if self.dim == 0:
                    self.dim = vectors.shape[1]
                elif vectors.shape[1] != self.dim:
                    raise CorpusFormatError(
                        f"{self.path}: inconsistent embedding dimension for id "
                        f"{sid!r}: {vectors.shape[1]} vs {self.dim}"
                    )
                if sid in self._records:
                    raise CorpusFormatError(f"{self.path}: duplicate id {sid!r}")
                self._records[sid] = (tokens, vectors)
        if self.dim and self.dim < 2:
            raise CorpusFormatError(f"{self.path}: embedding dimension must be >= 2")

    def __call__(self, batch: PaddedBatch) -> TokenEmbeddingBatch:
        b, w = len(batch), batch.width
        values = np.zeros((b, w, self.dim))
        for i, sid in enumerate(batch.ids):
            rec = self._records.get(sid)
            if rec is None:
                raise CorpusFormatError(f"{self.path}: missing sentence id {sid!r}")
            tokens, vectors = rec
            n = batch.lengths[i]
            if len(tokens) != n:
                raise CorpusFormatError(
                    f"{self.path}: token-count mismatch for id {sid!r}: file has "
                    f"{len(tokens)}, batch row has {n}"
                )
            row_tokens = batch.token_grid[i][:n]
            if tokens != row_tokens:
                raise CorpusFormatError(
                    f"{self.path}: tokens for id {sid!r} do not match the batch row"
                )
            values[i, :n] = vectors
        return TokenEmbeddingBatch(values=values, pad_mask=np.array(batch.pad_mask))


def load_contextual_embeddings(path: str | Path, batch: PaddedBatch) -> TokenEmbeddingBatch:
    """Load a contextual-embedding file and align it with one batch."""
    return FileEmbeddingProvider(path)(batch)


def mean_pool(batch: TokenEmbeddingBatch) -> np.ndarray:
    """Average token vectors over non-pad positions, per sentence.

    Pads are excluded from both the numerator and the denominator; a
    masked-to-zero real token still counts in the denominator.
    """
    counts = batch.pad_mask.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("cannot pool a sentence with no real tokens")
    sums = np.einsum("bwd,bw->bd", batch.values, batch.pad_mask.astype(np.float64))
    return sums / counts[:, None]
