"""Learned word redaction with divergence-based privacy estimation.

Trains a small neural ranker so that masking the lowest-ranked words of a
sensitive corpus makes it statistically hard to tell apart from a safe
corpus, then quantifies the achieved privacy as an (epsilon, delta)
estimate via Renyi divergence and concentrated differential privacy.
"""

from redactrank._kernels import kernel_backend

__all__ = ["kernel_backend"]
__version__ = "0.1.0"
