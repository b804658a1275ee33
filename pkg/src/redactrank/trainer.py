"""Training loop: embed, rank, soft-mask, pool, divergence loss, update.

Each step pads a sensitive and a safe batch to a common width, embeds
them with a frozen provider, ranks every word, builds per-sentence soft
lowest-K% masks, scales the embeddings by the mask, mean-pools to
sentence embeddings and takes the symmetrized KL loss between the two
pooled samples.  The gradient flows back through pooling, mask and ranks
into the MLP parameters only; embeddings are constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from redactrank._kernels import kl_divergence_loss_grad
from redactrank.corpus import Corpus, Sentence, pad_batch
from redactrank.divloss import EmbeddingSample, KdeConfig, bandwidth
from redactrank.embed import TokenEmbeddingBatch
from redactrank.mask import MaskConfig, _sigmoid, soft_topk_mask
from redactrank.ranker import (AdamState, RankerParams, adam_step, backprop,
                               init_params, rank_words)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for ranker training."""

    epochs: int = 3
    batch_size: int = 64
    mask: MaskConfig = field(default_factory=MaskConfig)
    kde: KdeConfig = field(default_factory=KdeConfig)
    lr: float = 0.001
    hidden: tuple[int, int, int] = (256, 128, 64)
    seed: int = 0
    loss_log_every: int = 10
    reshuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.loss_log_every < 1:
            raise ValueError("loss_log_every must be >= 1")


# (step index, average loss over the preceding loss_log_every steps)
LossTrace = list[tuple[int, float]]


@dataclass
class StepForward:
    """Caches from one forward pass, reused by the backward pass."""

    loss: float
    ranks0: np.ndarray
    ranks1: np.ndarray
    masks0: np.ndarray
    masks1: np.ndarray
    thresholds0: np.ndarray
    thresholds1: np.ndarray
    h: float
    pooled0: np.ndarray
    pooled1: np.ndarray


def _soft_masks(ranks: np.ndarray, pad_mask: np.ndarray, cfg: MaskConfig,
                thresholds: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Per-sentence soft masks; thresholds may be pinned externally."""
    masks = np.empty_like(ranks)
    out_th = np.empty(ranks.shape[0])
    for i in range(ranks.shape[0]):
        if thresholds is None:
            masks[i], out_th[i] = soft_topk_mask(ranks[i], cfg, pad_mask[i])
        else:
            out_th[i] = thresholds[i]
            masks[i] = _sigmoid(cfg.temperature * (ranks[i] - thresholds[i]))
    return masks, out_th


def _pool(emb: TokenEmbeddingBatch, masks: np.ndarray) -> np.ndarray:
    weighted = emb.values * masks[:, :, None] * emb.pad_mask[:, :, None]
    counts = emb.pad_mask.sum(axis=1).astype(np.float64)
    return weighted.sum(axis=1) / counts[:, None]


def forward_batch(params: RankerParams, emb0: TokenEmbeddingBatch,
                  emb1: TokenEmbeddingBatch, cfg: TrainConfig,
                  thresholds0: np.ndarray | None = None,
                  thresholds1: np.ndarray | None = None,
                  h: float | None = None) -> StepForward:
    """Full forward pass on a pre-embedded batch pair.

    thresholds0/1 and h pin the detached constants of the pipeline; the
    gradient check re-evaluates the loss with these held at their
    base-point values, matching what the analytic gradient differentiates.
    """
    ranks0 = rank_words(params, emb0)
    ranks1 = rank_words(params, emb1)
    masks0, th0 = _soft_masks(ranks0, emb0.pad_mask, cfg.mask, thresholds0)
    masks1, th1 = _soft_masks(ranks1, emb1.pad_mask, cfg.mask, thresholds1)
    pooled0 = _pool(emb0, masks0)
    pooled1 = _pool(emb1, masks1)
    s0 = EmbeddingSample(pooled0, "sensitive")
    s1 = EmbeddingSample(pooled1, "safe")
    if h is None:
        h = bandwidth(s0, s1, cfg.kde)
    loss, _, _ = kl_divergence_loss_grad(pooled0, pooled1, h, compute_grad=False)
    return StepForward(loss=loss, ranks0=ranks0, ranks1=ranks1,
                       masks0=masks0, masks1=masks1,
                       thresholds0=th0, thresholds1=th1, h=h,
                       pooled0=pooled0, pooled1=pooled1)


def _rank_upstream(emb: TokenEmbeddingBatch, masks: np.ndarray,
                   g_pooled: np.ndarray, temperature: float) -> np.ndarray:
    """Chain the pooled-embedding gradient back to per-position ranks."""
    counts = emb.pad_mask.sum(axis=1).astype(np.float64)
    # d pooled_b / d weighted_{b,w} = 1/count_b at real positions.
    g_mask = np.einsum("bwd,bd->bw", emb.values, g_pooled) / counts[:, None]
    g_rank = g_mask * temperature * masks * (1.0 - masks)
    g_rank[~emb.pad_mask] = 0.0
    return g_rank


def train_step(params: RankerParams, state: AdamState,
               db0: Sequence[Sentence], db1: Sequence[Sentence],
               provider, cfg: TrainConfig) -> tuple[RankerParams, AdamState, float]:
    """One optimization step over a sensitive/safe batch pair."""
    if not db0 or not db1:
        raise ValueError("both batches must be non-empty")
    combined = pad_batch(list(db0) + list(db1))
    emb = provider(combined)
    n0 = len(db0)
    emb0 = TokenEmbeddingBatch(values=emb.values[:n0], pad_mask=emb.pad_mask[:n0])
    emb1 = TokenEmbeddingBatch(values=emb.values[n0:], pad_mask=emb.pad_mask[n0:])

    fwd = forward_batch(params, emb0, emb1, cfg)
    if not np.isfinite(fwd.loss):
        raise FloatingPointError(
            f"training aborted: non-finite loss {fwd.loss!r} (bandwidth {fwd.h!r})"
        )
    _, g_pooled0, g_pooled1 = kl_divergence_loss_grad(
        fwd.pooled0, fwd.pooled1, fwd.h, compute_grad=True)

    up0 = _rank_upstream(emb0, fwd.masks0, g_pooled0, cfg.mask.temperature)
    up1 = _rank_upstream(emb1, fwd.masks1, g_pooled1, cfg.mask.temperature)
    grads = backprop(params, emb, np.vstack([up0, up1]))
    params, state = adam_step(params, grads, state)
    return params, state, fwd.loss


def train_ranker(corpus0: Corpus, corpus1: Corpus, provider,
                 cfg: TrainConfig = TrainConfig()) -> tuple[RankerParams, LossTrace]:
    """Train the ranking MLP over both corpora; returns params and loss trace.

    Per epoch both corpora are shuffled with seeded permutations and
    consumed in lockstep batches until the smaller corpus is exhausted;
    a trailing batch with fewer than 2 sentences per side is dropped.
    """
    n0, n1 = len(corpus0), len(corpus1)
    if min(n0, n1) < cfg.batch_size:
        raise ValueError(
            f"corpora ({n0}, {n1} sentences) are smaller than batch_size "
            f"{cfg.batch_size}; use a smaller batch_size"
        )
    h1, h2, h3 = cfg.hidden
    params = init_params(provider.dim, h1, h2, h3, seed=cfg.seed)
    state = AdamState.for_params(params, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    perm0 = rng.permutation(n0)
    perm1 = rng.permutation(n1)

    trace: LossTrace = []
    window: list[float] = []
    step = 0
    n = min(n0, n1)
    for epoch in range(cfg.epochs):
        if cfg.reshuffle_each_epoch and epoch > 0:
            perm0 = rng.permutation(n0)
            perm1 = rng.permutation(n1)
        for start in range(0, n, cfg.batch_size):
            stop = min(start + cfg.batch_size, n)
            if stop - start < 2:
                break
            db0 = [corpus0.sentences[i] for i in perm0[start:stop]]
            db1 = [corpus1.sentences[i] for i in perm1[start:stop]]
            params, state, loss = train_step(params, state, db0, db1, provider, cfg)
            step += 1
            window.append(loss)
            if len(window) == cfg.loss_log_every:
                trace.append((step, float(np.mean(window))))
                window = []
    return params, trace


def loss_trace_export(trace: LossTrace, path: str | Path) -> None:
    """Write the loss trace as CSV with header "step,avg_loss"."""
    if not trace:
        raise ValueError("cannot export an empty loss trace")
    lines = ["step,avg_loss"]
    lines.extend(f"{int(step)},{float(avg)!r}" for step, avg in trace)
    Path(path).write_text("\n".join(lines), encoding="utf-8")
