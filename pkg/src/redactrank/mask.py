"""Soft and hard lowest-K% selection over word ranks.

Training uses a differentiable relaxation: subtract a per-sentence
threshold near the k-th smallest rank, scale by a temperature and pass
through a sigmoid, so the lowest-ranked words map to ~0 and the rest to
~1.  Inference uses the exact lowest-K% index set.  The threshold is
treated as a constant when differentiating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

THRESHOLD_MODES = ("midpoint", "paper_exact")


@dataclass(frozen=True)
class MaskConfig:
    """Redaction percentage, sigmoid temperature and threshold rule."""

    redact_percent: float = 10.0
    temperature: float = 100.0
    threshold_mode: str = "midpoint"

    def __post_init__(self):
        if not 0.0 <= self.redact_percent <= 100.0:
            raise ValueError("redact_percent must be in [0, 100]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"threshold_mode must be one of {THRESHOLD_MODES}")


def redact_count(num_real_tokens: int, redact_percent: float) -> int:
    """ceil(K% of the real-token count), clamped to [0, n]."""
    if num_real_tokens < 1:
        raise ValueError("need at least one real token")
    count = math.ceil(redact_percent * num_real_tokens / 100.0)
    return min(max(count, 0), num_real_tokens)


def kth_smallest_threshold(ranks: np.ndarray, k: int,
                           mode: str = "midpoint") -> float:
    """Threshold at (or just above) the k-th smallest rank.

    'paper_exact' returns the k-th smallest rank itself.  'midpoint'
    returns the midpoint between the k-th and (k+1)-th smallest, or the
    k-th plus one when k covers every element, so that the lowest k
    values land strictly below the threshold.  Equal ranks are ordered by
    token index.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    n = ranks.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    order = np.argsort(ranks, kind="stable")
    kth = float(ranks[order[k - 1]])
    if mode == "paper_exact":
        return kth
    if mode == "midpoint":
        if k < n:
            return (kth + float(ranks[order[k]])) / 2.0
        return kth + 1.0
    raise ValueError(f"unknown threshold mode {mode!r}")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def soft_topk_mask(ranks: np.ndarray, cfg: MaskConfig,
                   pad_mask: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Differentiable lowest-K% mask for one sentence's rank vector.

    Returns (mask, threshold) where mask_i = sigmoid(T * (rank_i - threshold)).
    With zero redaction the threshold is 0 and the mask saturates near 1.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    real = _real_positions(ranks, pad_mask)
    k = redact_count(int(real.sum()), cfg.redact_percent)
    if k == 0:
        threshold = 0.0
    else:
        threshold = kth_smallest_threshold(ranks[real], k, cfg.threshold_mode)
    return _sigmoid(cfg.temperature * (ranks - threshold)), threshold


def soft_mask_grad(ranks: np.ndarray, cfg: MaskConfig, upstream: np.ndarray,
                   pad_mask: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the soft mask with respect to the ranks.

    Elementwise T * m * (1 - m); the threshold is a constant, so there are
    no cross terms.
    """
    mask, _ = soft_topk_mask(ranks, cfg, pad_mask)
    return np.asarray(upstream, dtype=np.float64) * cfg.temperature * mask * (1.0 - mask)


def hard_topk_indices(ranks: np.ndarray, redact_percent: float,
                      pad_mask: np.ndarray | None = None) -> set[int]:
    """Positions of the lowest-K% ranks; ties go to the earlier index.

    Pads are never selected.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    real = _real_positions(ranks, pad_mask)
    real_idx = np.flatnonzero(real)
    k = redact_count(real_idx.size, redact_percent)
    if k == 0:
        return set()
    order = np.argsort(ranks[real_idx], kind="stable")
    return {int(real_idx[i]) for i in order[:k]}


def _real_positions(ranks: np.ndarray, pad_mask: np.ndarray | None) -> np.ndarray:
    if pad_mask is None:
        return np.ones(ranks.shape[0], dtype=bool)
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if pad_mask.shape != ranks.shape:
        raise ValueError("pad mask shape must match the rank vector")
    if not pad_mask.any():
        raise ValueError("rank vector has no real positions")
    return pad_mask
