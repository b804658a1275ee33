"""Privacy estimation for redacted corpus pairs.

Sentence embeddings of both redacted corpora are quantized with k-means,
turned into smoothed histograms, and compared with the discrete Renyi
divergence of order alpha (both directions, max taken).  The divergence is
converted to an (epsilon, delta) estimate, by default by treating the
measured order-alpha divergence as zero-concentrated DP evidence with
rho = D_alpha / alpha.  Everything here is an estimate of achieved
indistinguishability, not a formal guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from redactrank._kernels import assign_nearest
from redactrank.corpus import Corpus, Sentence, apply_redaction, pad_batch
from redactrank.embed import mean_pool
from redactrank.mask import hard_topk_indices

CONVERSIONS = ("zcdp", "rdp")
DELTA_RULES = ("one_over_n", "fixed")

# Maps a list of sentences to one rank vector per sentence (pads stripped).
# Both the trained MLP and the TFIDF baseline expose this interface.
WordRanker = Callable[[Sequence[Sentence]], list[np.ndarray]]


@dataclass
class QuantizerModel:
    """k-means centroids fit on the union of both embedding samples."""

    centroids: np.ndarray
    seed: int
    iterations: int

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


@dataclass
class SmoothedHistogram:
    """Strictly positive cluster-occupancy probabilities."""

    probs: np.ndarray
    smoothing: float

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if np.any(self.probs <= 0.0):
            raise ValueError("smoothed probabilities must be strictly positive")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")


@dataclass(frozen=True)
class DivergenceEstimate:
    """Order-alpha divergence between two corpora, both directions."""

    alpha: float
    value_01: float
    value_10: float

    @property
    def value(self) -> float:
        return max(self.value_01, self.value_10)


@dataclass(frozen=True)
class PrivacyEstimate:
    """(epsilon, delta) implied by a divergence estimate."""

    epsilon: float
    delta: float
    alpha: float
    rho: float
    conversion: str


def fit_quantizer(points0: np.ndarray, points1: np.ndarray, n_clusters: int,
                  seed: int = 0) -> QuantizerModel:
    """k-means++ then Lloyd iterations on the union of both point sets.

    Stops when the largest centroid movement drops below 1e-6 or after 100
    iterations; an emptied cluster is re-seeded from the farthest point.
    """
    points = np.vstack([np.asarray(points0, dtype=np.float64),
                        np.asarray(points1, dtype=np.float64)])
    n = points.shape[0]
    if n < n_clusters:
        raise ValueError(
            f"{n} points cannot support {n_clusters} clusters; reduce the cluster count"
        )
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, n_clusters, rng)
    iterations = 0
    for _ in range(100):
        iterations += 1
        labels, sq = assign_nearest(points, centroids)
        new_centroids = centroids.copy()
        for c in range(n_clusters):
            members = labels == c
            if members.any():
                new_centroids[c] = points[members].mean(axis=0)
            else:
                far = int(np.argmax(sq))
                new_centroids[c] = points[far]
                sq = sq.copy()
                sq[far] = -1.0  # next empty cluster takes the next-farthest
        move = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if move < 1e-6:
            break
    return QuantizerModel(centroids=centroids, seed=seed, iterations=iterations)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    for _ in range(k - 1):
        _, sq = assign_nearest(points, points[chosen])
        total = float(sq.sum())
        if total <= 0.0:
            # all points coincide with chosen centroids; any pick works
            chosen.append(int(rng.integers(n)))
            continue
        chosen.append(int(rng.choice(n, p=sq / total)))
    return points[chosen].copy()


def smoothed_histogram(points: np.ndarray, quantizer: QuantizerModel,
                       smoothing: float = 1.0) -> SmoothedHistogram:
    """Additive-smoothed cluster occupancy: (count_c + lam) / (n + lam * C)."""
    if smoothing <= 0.0:
        raise ValueError("smoothing must be positive")
    points = np.asarray(points, dtype=np.float64)
    c = quantizer.n_clusters
    counts = np.zeros(c)
    if points.shape[0] > 0:
        labels, _ = assign_nearest(points, quantizer.centroids)
        counts += np.bincount(labels, minlength=c)
    probs = (counts + smoothing) / (points.shape[0] + smoothing * c)
    return SmoothedHistogram(probs=probs, smoothing=smoothing)


def renyi_discrete(p: SmoothedHistogram | np.ndarray,
                   q: SmoothedHistogram | np.ndarray, alpha: float) -> float:
    """Discrete order-alpha Renyi divergence, clamped at zero.

    alpha = 1 is routed to the KL divergence (the limit); other orders use
    (1/(alpha-1)) * log sum p^alpha q^(1-alpha), evaluated in log space.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    pv = p.probs if isinstance(p, SmoothedHistogram) else np.asarray(p, dtype=np.float64)
    qv = q.probs if isinstance(q, SmoothedHistogram) else np.asarray(q, dtype=np.float64)
    if pv.shape != qv.shape:
        raise ValueError("histograms must have the same number of clusters")
    if np.any(pv <= 0.0) or np.any(qv <= 0.0):
        raise ValueError("histograms must be strictly positive")
    if alpha == 1.0:
        return max(0.0, float(np.sum(pv * np.log(pv / qv))))
    terms = alpha * np.log(pv) + (1.0 - alpha) * np.log(qv)
    mx = float(np.max(terms))
    lse = mx + float(np.log(np.sum(np.exp(terms - mx))))
    return max(0.0, lse / (alpha - 1.0))


def embed_corpus_points(corpus: Corpus, provider) -> np.ndarray:
    """Mean-pooled sentence embeddings for a whole corpus, as an (n, d) array."""
    if not corpus.sentences:
        raise ValueError("cannot embed an empty corpus")
    batch = pad_batch(corpus.sentences)
    return mean_pool(provider(batch))


def estimate_divergence(corpus0: Corpus, corpus1: Corpus, provider,
                        alpha: float = 2.0, n_clusters: int = 10,
                        smoothing: float = 1.0, seed: int = 0) -> DivergenceEstimate:
    """Quantize-then-divergence estimate between two (redacted) corpora."""
    points0 = embed_corpus_points(corpus0, provider)
    points1 = embed_corpus_points(corpus1, provider)
    quantizer = fit_quantizer(points0, points1, n_clusters, seed=seed)
    hist0 = smoothed_histogram(points0, quantizer, smoothing)
    hist1 = smoothed_histogram(points1, quantizer, smoothing)
    return DivergenceEstimate(
        alpha=alpha,
        value_01=renyi_discrete(hist0, hist1, alpha),
        value_10=renyi_discrete(hist1, hist0, alpha),
    )


def epsilon_from_divergence(est: DivergenceEstimate, delta: float,
                            conversion: str = "zcdp") -> PrivacyEstimate:
    """Convert a divergence estimate to (epsilon, delta).

    zcdp (default): rho = D_alpha / alpha, epsilon = rho + 2*sqrt(rho*ln(1/delta)).
    rdp: epsilon = D_alpha + ln(1/delta) / (alpha - 1), requires alpha > 1.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if conversion not in CONVERSIONS:
        raise ValueError(f"conversion must be one of {CONVERSIONS}")
    rho = est.value / est.alpha
    if conversion == "zcdp":
        epsilon = rho + 2.0 * np.sqrt(rho * np.log(1.0 / delta))
    else:
        if est.alpha <= 1.0:
            raise ValueError("the rdp conversion requires alpha > 1")
        epsilon = est.value + np.log(1.0 / delta) / (est.alpha - 1.0)
    return PrivacyEstimate(epsilon=float(epsilon), delta=delta, alpha=est.alpha,
                           rho=float(rho), conversion=conversion)


def redact_corpus(corpus: Corpus, ranker: WordRanker,
                  redact_percent: float) -> tuple[Corpus, list[set[int]]]:
    """Redact the lowest-K% ranked words of every sentence."""
    ranks = ranker(corpus.sentences)
    redacted, index_sets = [], []
    for sent, r in zip(corpus.sentences, ranks):
        idx = hard_topk_indices(np.asarray(r, dtype=np.float64), redact_percent)
        redacted.append(apply_redaction(sent, idx))
        index_sets.append(idx)
    return Corpus(role=corpus.role, sentences=redacted), index_sets


@dataclass(frozen=True)
class SweepRow:
    """One redaction level of an epsilon sweep."""

    redaction_percent: float
    alpha: float
    divergence: float
    rho: float
    epsilon: float
    delta: float


def epsilon_curve(corpus0: Corpus, corpus1: Corpus, ranker: WordRanker,
                  provider, k_grid: Sequence[float], *, alpha: float = 2.0,
                  n_clusters: int = 10, smoothing: float = 1.0, seed: int = 0,
                  delta_rule: str = "one_over_n", fixed_delta: float | None = None,
                  conversion: str = "zcdp") -> list[SweepRow]:
    """Divergence and epsilon at each redaction level in k_grid.

    delta defaults to 1 / (total sentences across both corpora).  Each grid
    point derives its own sub-seed, so evaluating levels in any order (or
    in parallel) gives the same rows.
    """
    if delta_rule not in DELTA_RULES:
        raise ValueError(f"delta_rule must be one of {DELTA_RULES}")
    if delta_rule == "fixed":
        if fixed_delta is None:
            raise ValueError("fixed delta_rule requires fixed_delta")
        delta = float(fixed_delta)
    else:
        delta = 1.0 / (len(corpus0) + len(corpus1))
    rows = []
    for i, k in enumerate(k_grid):
        if not 0.0 <= k <= 100.0:
            raise ValueError(f"redaction percent {k} outside [0, 100]")
        sub_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        red0, _ = redact_corpus(corpus0, ranker, k)
        red1, _ = redact_corpus(corpus1, ranker, k)
        est = estimate_divergence(red0, red1, provider, alpha=alpha,
                                  n_clusters=n_clusters, smoothing=smoothing,
                                  seed=sub_seed)
        priv = epsilon_from_divergence(est, delta, conversion)
        rows.append(SweepRow(redaction_percent=float(k), alpha=float(alpha),
                             divergence=est.value, rho=priv.rho,
                             epsilon=priv.epsilon, delta=delta))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    """Write sweep rows with the fixed header."""
    lines = ["redaction_percent,alpha,divergence,rho,epsilon,delta"]
    for r in rows:
        lines.append(",".join(repr(float(v)) for v in (
            r.redaction_percent, r.alpha, r.divergence, r.rho, r.epsilon, r.delta)))
    Path(path).write_text("\n".join(lines), encoding="utf-8")
