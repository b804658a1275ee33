"""Comparison ranker: logistic regression on TFIDF features.

The classifier separates sensitive from safe sentences; each word's
redaction priority is the magnitude of its learned weight, so the words
most indicative of either class are redacted first.  Documents are single
sentences.  Features are dense, which is fine at the corpus sizes this
library targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from redactrank.corpus import Corpus, Sentence
from redactrank.privacy import WordRanker


@dataclass
class TfidfVocab:
    """Dense word -> column mapping with inverse document frequencies."""

    index: dict[str, int]
    idf: np.ndarray

    @property
    def size(self) -> int:
        return len(self.index)


@dataclass
class LogRegModel:
    """Per-word weights and bias of the trained classifier."""

    weights: np.ndarray
    bias: float = 0.0
    trained: bool = False
    word_weights: dict[str, float] = field(default_factory=dict)

    def weight_of(self, token: str) -> float:
        return self.word_weights.get(token, 0.0)


def fit_tfidf(corpus0: Corpus, corpus1: Corpus) -> TfidfVocab:
    """Vocabulary and idf over the union of both corpora.

    idf_w = ln((1 + N) / (1 + df_w)) + 1 with N the total sentence count.
    """
    if not corpus0.sentences or not corpus1.sentences:
        raise ValueError("both corpora must be non-empty")
    sentences = corpus0.sentences + corpus1.sentences
    df: dict[str, int] = {}
    for sent in sentences:
        for tok in set(sent.tokens):
            df[tok] = df.get(tok, 0) + 1
    words = sorted(df)
    index = {w: i for i, w in enumerate(words)}
    n = len(sentences)
    idf = np.array([np.log((1.0 + n) / (1.0 + df[w])) + 1.0 for w in words])
    return TfidfVocab(index=index, idf=idf)


def featurize(sentences: Sequence[Sentence], vocab: TfidfVocab) -> np.ndarray:
    """L2-normalized tf*idf rows; out-of-vocabulary tokens are ignored."""
    x = np.zeros((len(sentences), vocab.size))
    for i, sent in enumerate(sentences):
        for tok in sent.tokens:
            j = vocab.index.get(tok)
            if j is not None:
                x[i, j] += 1.0
    x *= vocab.idf[None, :]
    norms = np.linalg.norm(x, axis=1)
    norms[norms == 0.0] = 1.0
    return x / norms[:, None]


def train_logreg(corpus0: Corpus, corpus1: Corpus, vocab: TfidfVocab,
                 epochs: int = 200, lr: float = 0.5, seed: int = 0) -> LogRegModel:
    """Full-batch gradient descent on binary cross-entropy, zero init.

    Label 1 marks the sensitive corpus.  Deterministic; the seed parameter
    is kept for interface stability but unused (nothing is random).
    """
    del seed
    roles = {corpus0.role, corpus1.role}
    if roles != {"sensitive", "safe"}:
        raise ValueError("need one sensitive and one safe corpus")
    sentences = corpus0.sentences + corpus1.sentences
    y = np.concatenate([
        np.full(len(corpus0), 1.0 if corpus0.role == "sensitive" else 0.0),
        np.full(len(corpus1), 1.0 if corpus1.role == "sensitive" else 0.0),
    ])
    x = featurize(sentences, vocab)
    n = x.shape[0]
    w = np.zeros(vocab.size)
    b = 0.0
    for _ in range(epochs):
        s = x @ w + b
        p = _sigmoid(s)
        # stable BCE, only as a divergence guard
        loss = float(np.mean(np.maximum(s, 0.0) - s * y + np.log1p(np.exp(-np.abs(s)))))
        if not np.isfinite(loss):
            raise FloatingPointError(f"logistic training diverged (loss {loss!r})")
        err = p - y
        w -= lr * (x.T @ err) / n
        b -= lr * float(np.mean(err))
    words = sorted(vocab.index, key=vocab.index.get)
    return LogRegModel(weights=w, bias=b, trained=True,
                       word_weights={word: float(w[vocab.index[word]]) for word in words})


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def predict_proba(model: LogRegModel, vocab: TfidfVocab,
                  sentences: Sequence[Sentence]) -> np.ndarray:
    """P(sensitive) per sentence."""
    return _sigmoid(featurize(sentences, vocab) @ model.weights + model.bias)


def rank_words_baseline(model: LogRegModel, sentence: Sentence) -> np.ndarray:
    """Bounded ranks so the largest-|weight| words are redacted first.

    rank = 1 / (2 + |weight|): strictly inside (0, 1), decreasing in the
    weight magnitude, order-invariant under positive rescaling of the
    weights.  Unseen words get the maximum rank and are redacted last.
    """
    if not model.trained:
        raise ValueError("the baseline model has not been trained")
    return np.array([1.0 / (2.0 + abs(model.weight_of(t))) for t in sentence.tokens])


def make_word_ranker(model: LogRegModel) -> WordRanker:
    """Adapt the baseline to the shared word-ranker interface."""
    def rank_sentences(sentences: Sequence[Sentence]) -> list[np.ndarray]:
        return [rank_words_baseline(model, s) for s in sentences]

    return rank_sentences


def save_baseline(path: str | Path, model: LogRegModel) -> None:
    """JSON checkpoint: word -> weight mapping plus the bias."""
    if not model.trained:
        raise ValueError("refusing to checkpoint an untrained baseline")
    doc = {
        "format": "redactrank-baseline",
        "version": 1,
        "weights": model.word_weights,
        "bias": model.bias,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_baseline(path: str | Path) -> LogRegModel:
    """Load a checkpoint written by save_baseline."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "redactrank-baseline":
        raise ValueError(f"{path}: not a baseline checkpoint")
    if doc.get("version") != 1:
        raise ValueError(f"{path}: unsupported baseline version {doc.get('version')}")
    word_weights = {str(k): float(v) for k, v in doc["weights"].items()}
    weights = np.array([word_weights[w] for w in sorted(word_weights)])
    return LogRegModel(weights=weights, bias=float(doc["bias"]), trained=True,
                       word_weights=word_weights)
