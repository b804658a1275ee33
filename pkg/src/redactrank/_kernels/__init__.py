"""Numeric kernel backend selection.

The hot inner loops (pairwise distances, the kernel-density KL loss and its
gradient, nearest-centroid assignment) exist twice: a compiled Cython core
and a pure NumPy fallback.  The compiled core is preferred when importable;
set REDACTRANK_BACKEND=python to force the fallback or =compiled to require
the extension.
"""

import os

from redactrank._kernels import _purepy

_requested = os.environ.get("REDACTRANK_BACKEND", "").strip().lower()
if _requested not in ("", "compiled", "python"):
    raise RuntimeError(
        f"REDACTRANK_BACKEND must be 'compiled' or 'python', got {_requested!r}"
    )

if _requested == "python":
    _impl = _purepy
else:
    try:
        from redactrank._kernels import _core as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _purepy

pairwise_sq_dists = _impl.pairwise_sq_dists
assign_nearest = _impl.assign_nearest
kl_divergence_loss_grad = _impl.kl_divergence_loss_grad


def kernel_backend() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return _impl.BACKEND_NAME
