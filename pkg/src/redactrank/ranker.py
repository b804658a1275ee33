"""Word-ranking MLP: forward pass, backpropagation and Adam, by hand.

Four linear layers; tanh on the first three, sigmoid on the last, so every
word embedding maps to a scalar rank in (0, 1).  Pad positions are assigned
the sentinel rank 1 so they can never fall into the lowest-K% selection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from redactrank.corpus import Sentence, pad_batch
from redactrank.embed import TokenEmbeddingBatch

PAD_RANK = 1.0

_WEIGHT_KEYS = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")


@dataclass
class RankerParams:
    """Weights and biases of the 4-layer ranking MLP."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    w4: np.ndarray
    b4: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.w1.shape[0], self.w1.shape[1], self.w2.shape[1], self.w3.shape[1])

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in _WEIGHT_KEYS}

    def copy(self) -> "RankerParams":
        return RankerParams(**{k: v.copy() for k, v in self.arrays().items()})


@dataclass
class AdamState:
    """Adam accumulators shaped like the params, plus hyperparameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: RankerParams, lr: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        zeros = {k: np.zeros_like(a) for k, a in params.arrays().items()}
        return cls(m=zeros, v={k: a.copy() for k, a in zeros.items()},
                   t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def init_params(d: int, h1: int = 256, h2: int = 128, h3: int = 64,
                seed: int = 0) -> RankerParams:
    """Glorot-uniform weights, zero biases, deterministic in the seed."""
    if min(d, h1, h2, h3) < 1:
        raise ValueError("all layer dimensions must be >= 1")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return RankerParams(
        w1=glorot(d, h1), b1=np.zeros(h1),
        w2=glorot(h1, h2), b2=np.zeros(h2),
        w3=glorot(h2, h3), b3=np.zeros(h3),
        w4=glorot(h3, 1), b4=np.zeros(1),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward(params: RankerParams, x: np.ndarray):
    """Forward over flat positions x (N, d); returns activations and ranks."""
    a1 = np.tanh(x @ params.w1 + params.b1)
    a2 = np.tanh(a1 @ params.w2 + params.b2)
    a3 = np.tanh(a2 @ params.w3 + params.b3)
    y = _sigmoid(a3 @ params.w4 + params.b4)[:, 0]
    return a1, a2, a3, y


def rank_words(params: RankerParams, batch: TokenEmbeddingBatch) -> np.ndarray:
    """Rank every token; returns (B, W) with pads forced to the sentinel."""
    if batch.dim != params.dims[0]:
        raise ValueError(
            f"embedding dim {batch.dim} does not match ranker input dim {params.dims[0]}"
        )
    b, w, d = batch.values.shape
    flat = batch.values.reshape(b * w, d)
    _, _, _, y = _forward(params, flat)
    ranks = y.reshape(b, w)
    ranks[~batch.pad_mask] = PAD_RANK
    return ranks


def backprop(params: RankerParams, batch: TokenEmbeddingBatch,
             upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of sum(upstream * ranks) with respect to every parameter.

    upstream is (B, W) and must be zero at pad positions; contributions are
    accumulated over all non-pad positions.
    """
    if upstream.shape != batch.pad_mask.shape:
        raise ValueError("upstream gradient shape must match the batch")
    if np.any(upstream[~batch.pad_mask] != 0.0):
        raise ValueError("upstream gradient must be zero at pad positions")
    if batch.dim != params.dims[0]:
        raise ValueError("embedding dim does not match ranker input dim")

    b, w, d = batch.values.shape
    x = batch.values.reshape(b * w, d)
    u = upstream.reshape(b * w)
    a1, a2, a3, y = _forward(params, x)

    dz4 = (u * y * (1.0 - y))[:, None]          # sigmoid'
    gw4 = a3.T @ dz4
    gb4 = dz4.sum(axis=0)
    dz3 = (dz4 @ params.w4.T) * (1.0 - a3 * a3)  # tanh'
    gw3 = a2.T @ dz3
    gb3 = dz3.sum(axis=0)
    dz2 = (dz3 @ params.w3.T) * (1.0 - a2 * a2)
    gw2 = a1.T @ dz2
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ params.w2.T) * (1.0 - a1 * a1)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2,
            "w3": gw3, "b3": gb3, "w4": gw4, "b4": gb4}


def adam_step(params: RankerParams, grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[RankerParams, AdamState]:
    """One bias-corrected Adam update; aborts on non-finite gradients."""
    for k in _WEIGHT_KEYS:
        if not np.all(np.isfinite(grads[k])):
            raise FloatingPointError(f"non-finite gradient in {k}; aborting update")
    t = state.t + 1
    new_arrays, new_m, new_v = {}, {}, {}
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for k, theta in params.arrays().items():
        g = grads[k]
        m = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        step = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_arrays[k] = theta - step
        new_m[k] = m
        new_v[k] = v
    return RankerParams(**new_arrays), replace(state, m=new_m, v=new_v, t=t)


def save_checkpoint(path: str | Path, params: RankerParams,
                    state: AdamState | None = None, seed: int | None = None) -> None:
    """Write a JSON checkpoint that round-trips bit-exactly."""
    doc = {
        "format": "redactrank-checkpoint",
        "version": 1,
        "dims": list(params.dims),
        "seed": seed,
        "params": {k: a.tolist() for k, a in params.arrays().items()},
        "adam": None if state is None else {
            "m": {k: a.tolist() for k, a in state.m.items()},
            "v": {k: a.tolist() for k, a in state.v.items()},
            "t": state.t, "lr": state.lr, "beta1": state.beta1,
            "beta2": state.beta2, "eps": state.eps,
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[RankerParams, AdamState | None, int | None]:
    """Load a checkpoint written by save_checkpoint."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "redactrank-checkpoint":
        raise ValueError(f"{path}: not a ranker checkpoint")
    if doc.get("version") != 1:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    params = RankerParams(**{
        k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()
    })
    state = None
    if doc.get("adam") is not None:
        a = doc["adam"]
        state = AdamState(
            m={k: np.asarray(v, dtype=np.float64) for k, v in a["m"].items()},
            v={k: np.asarray(v, dtype=np.float64) for k, v in a["v"].items()},
            t=a["t"], lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"],
        )
    return params, state, doc.get("seed")


def make_word_ranker(params: RankerParams, provider):
    """Adapt the MLP to the shared word-ranker interface.

    The returned callable maps a list of sentences to one rank array per
    sentence (pads stripped), which is what redaction and the privacy
    sweep consume.
    """
    def rank_sentences(sentences: Sequence[Sentence]) -> list[np.ndarray]:
        batch = pad_batch(sentences)
        ranks = rank_words(params, provider(batch))
        return [ranks[i, :batch.lengths[i]].copy() for i in range(len(batch))]

    return rank_sentences
