"""Differentiable KL-divergence loss between two sets of sentence embeddings.

Each side's density is modelled as an isotropic Gaussian kernel density
estimate with a bandwidth shared by both sides, so the normalizing
constant cancels out of every difference of log-densities.  Self-density
uses leave-one-out sums.  The loss is symmetrized (both directions summed)
and its gradient with respect to every point is analytic, with the
bandwidth and the leave-one-out structure held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from redactrank._kernels import kl_divergence_loss_grad, pairwise_sq_dists

BANDWIDTH_RULES = ("median_heuristic", "fixed")


@dataclass
class EmbeddingSample:
    """n x d sentence-embedding points from one corpus."""

    points: np.ndarray
    origin: str = "sensitive"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 2:
            raise ValueError("an embedding sample needs at least 2 points")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("embedding sample contains non-finite values")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class KdeConfig:
    """Bandwidth selection for the kernel density estimates."""

    bandwidth_rule: str = "median_heuristic"
    fixed_h: float = 1.0
    floor_h: float = 1e-3

    def __post_init__(self):
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise ValueError(f"bandwidth_rule must be one of {BANDWIDTH_RULES}")
        if self.fixed_h <= 0.0 or self.floor_h <= 0.0:
            raise ValueError("bandwidths must be positive")


def bandwidth(sample0: EmbeddingSample, sample1: EmbeddingSample,
              cfg: KdeConfig = KdeConfig()) -> float:
    """Shared bandwidth for a pair of samples.

    Median heuristic: median pairwise distance over the pooled points,
    divided by sqrt(2), floored at floor_h.  Treated as a constant when
    differentiating the loss.
    """
    if cfg.bandwidth_rule == "fixed":
        return max(cfg.fixed_h, cfg.floor_h)
    pooled = np.vstack([sample0.points, sample1.points])
    if pooled.shape[0] < 3:
        raise ValueError("median heuristic needs at least 3 pooled points")
    sq = pairwise_sq_dists(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    med = float(np.median(np.sqrt(sq[iu])))
    return max(med / np.sqrt(2.0), cfg.floor_h)


def kde_log_density(x: np.ndarray, sample: EmbeddingSample, h: float,
                    exclude_index: int | None = None) -> float:
    """Log mean Gaussian kernel between x and the sample points.

    The normalizing constant is omitted (it cancels in the loss); the sum
    is stabilized with log-sum-exp.  exclude_index drops one sample point,
    for leave-one-out self-densities.
    """
    pts = sample.points
    if exclude_index is not None:
        pts = np.delete(pts, exclude_index, axis=0)
    if pts.shape[0] == 0:
        raise ValueError("no points left to evaluate the density")
    x = np.asarray(x, dtype=np.float64)
    expo = -np.sum((pts - x) ** 2, axis=1) / (2.0 * h * h)
    mx = float(np.max(expo))
    return mx + float(np.log(np.sum(np.exp(expo - mx)))) - np.log(pts.shape[0])


def kl_loss(sample0: EmbeddingSample, sample1: EmbeddingSample,
            cfg: KdeConfig = KdeConfig()) -> float:
    """Symmetrized KL estimate: KL(0||1) + KL(1||0) under the shared-h KDEs."""
    h = bandwidth(sample0, sample1, cfg)
    loss, _, _ = kl_divergence_loss_grad(sample0.points, sample1.points, h,
                                         compute_grad=False)
    return loss


def kl_loss_grad(sample0: EmbeddingSample, sample1: EmbeddingSample,
                 cfg: KdeConfig = KdeConfig()) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus exact gradients with respect to every point of both samples.

    The bandwidth and the leave-one-out structure are held fixed, so in
    median-heuristic mode the returned gradient deliberately omits the
    bandwidth's own dependence on the points.
    """
    h = bandwidth(sample0, sample1, cfg)
    loss, g0, g1 = kl_divergence_loss_grad(sample0.points, sample1.points, h,
                                           compute_grad=True)
    return loss, g0, g1
