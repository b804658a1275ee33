"""Corpus loading, tokenization, padding and redaction.

A corpus is a list of tokenized sentences tagged with a role (sensitive or
safe).  On disk a corpus is UTF-8 JSON-lines with one object per line and a
required "text" key; redacted output uses the same layout plus a
"redacted_indices" array.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

MASK_TOKEN = "[MASK]"
PAD_TOKEN = "[pad]"
ROLES = ("sensitive", "safe")


class CorpusFormatError(ValueError):
    """Raised for malformed corpus or embedding files."""


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence; the unit of redaction."""

    id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")
        if any(t == "" for t in self.tokens):
            raise ValueError(f"sentence {self.id!r} contains an empty token")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class Corpus:
    """Sentences sharing a role, plus ingestion metadata."""

    role: str
    sentences: list[Sentence]
    skipped: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        ids = [s.id for s in self.sentences]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sentence ids within corpus")

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass
class PaddedBatch:
    """Rectangular token grid with a mask marking real (non-pad) positions."""

    token_grid: list[list[str]]
    pad_mask: list[list[bool]]
    lengths: list[int]
    ids: list[str]

    @property
    def width(self) -> int:
        return len(self.token_grid[0]) if self.token_grid else 0

    def __len__(self) -> int:
        return len(self.token_grid)


def tokenize(text: str) -> list[str]:
    """Split on Unicode whitespace, lowercase, strip edge punctuation.

    Tokens that become empty (pure punctuation) are dropped.
    """
    out = []
    for raw in text.split():
        tok = _strip_punct(raw.lower())
        if tok:
            out.append(tok)
    return out


def _strip_punct(tok: str) -> str:
    start, end = 0, len(tok)
    while start < end and unicodedata.category(tok[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(tok[end - 1]).startswith("P"):
        end -= 1
    return tok[start:end]


def load_corpus(path: str | Path, role: str) -> Corpus:
    """Load a JSON-lines corpus file; each line must carry a "text" string.

    Lines whose text tokenizes to nothing are skipped and counted in the
    returned corpus' ``skipped`` field.  Malformed lines raise
    CorpusFormatError naming the line number.
    """
    path = Path(path)
    sentences: list[Sentence] = []
    skipped = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"{path}: malformed JSON on line {lineno}: {exc}"
                ) from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
                raise CorpusFormatError(
                    f"{path}: line {lineno} must be an object with a string 'text'"
                )
            tokens = tokenize(obj["text"])
            if not tokens:
                skipped += 1
                continue
            reserved = {MASK_TOKEN, PAD_TOKEN} & set(tokens)
            if reserved:
                raise CorpusFormatError(
                    f"{path}: line {lineno} contains reserved token(s) {sorted(reserved)}"
                )
            sentences.append(Sentence(id=f"line-{lineno}", tokens=tuple(tokens)))
    return Corpus(role=role, sentences=sentences, skipped=skipped)


def pad_batch(sentences: Sequence[Sentence]) -> PaddedBatch:
    """Right-pad sentences to the longest length in the batch."""
    if not sentences:
        raise ValueError("cannot pad an empty batch")
    width = max(len(s) for s in sentences)
    grid, mask, lengths, ids = [], [], [], []
    for s in sentences:
        n = len(s)
        grid.append(list(s.tokens) + [PAD_TOKEN] * (width - n))
        mask.append([True] * n + [False] * (width - n))
        lengths.append(n)
        ids.append(s.id)
    return PaddedBatch(token_grid=grid, pad_mask=mask, lengths=lengths, ids=ids)


def apply_redaction(sentence: Sentence, redact_indices: Iterable[int]) -> Sentence:
    """Replace the tokens at the given positions with the mask token."""
    indices = set(redact_indices)
    bad = [i for i in indices if not 0 <= i < len(sentence)]
    if bad:
        raise ValueError(
            f"redaction indices {sorted(bad)} out of range for sentence "
            f"{sentence.id!r} of length {len(sentence)}"
        )
    tokens = tuple(
        MASK_TOKEN if i in indices else t for i, t in enumerate(sentence.tokens)
    )
    return Sentence(id=sentence.id, tokens=tokens)


def write_redacted(path: str | Path,
                   redacted: Sequence[Sentence],
                   indices: Sequence[Iterable[int]]) -> None:
    """Write redacted sentences as JSON-lines with their redacted positions."""
    if len(redacted) != len(indices):
        raise ValueError("one index set per sentence required")
    with Path(path).open("w", encoding="utf-8") as fh:
        for sent, idx in zip(redacted, indices):
            fh.write(json.dumps({
                "text": " ".join(sent.tokens),
                "redacted_indices": sorted(int(i) for i in idx),
            }) + "\n")
