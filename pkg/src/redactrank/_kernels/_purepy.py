"""Pure NumPy implementations of the hot numeric kernels.

These mirror the compiled Cython kernels in ``_core.pyx``.  Keep the two in
sync: the test suite cross-checks them whenever the extension is available.
"""

import numpy as np

BACKEND_NAME = "python"


def pairwise_sq_dists(a, b):
    """Squared Euclidean distances between the rows of two matrices.

    Returns an (n, m) array for a of shape (n, d) and b of shape (m, d).
    Clamped at zero to absorb cancellation round-off.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def assign_nearest(points, centroids):
    """Nearest-centroid assignment.

    Returns (labels, sq_dist) where labels[i] is the index of the centroid
    closest to points[i] (ties go to the lowest index) and sq_dist[i] the
    squared distance to it.
    """
    sq = pairwise_sq_dists(points, centroids)
    labels = np.argmin(sq, axis=1)
    return labels.astype(np.int64), sq[np.arange(sq.shape[0]), labels]


def _logmeanexp_rows(neg_sq_over, exclude_diag):
    """Row-wise log of the mean of exp(x) with optional diagonal exclusion."""
    a = neg_sq_over
    if exclude_diag:
        a = a.copy()
        np.fill_diagonal(a, -np.inf)
        m = a.shape[1] - 1
    else:
        m = a.shape[1]
    mx = np.max(a, axis=1)
    w = np.exp(a - mx[:, None])
    if exclude_diag:
        np.fill_diagonal(w, 0.0)
    s = np.sum(w, axis=1)
    return mx + np.log(s) - np.log(m), w / s[:, None]


def kl_divergence_loss_grad(p0, p1, h, compute_grad=True):
    """Symmetrized kernel-density KL estimate between two point sets.

    The density of each set is a Gaussian kernel estimate with shared
    bandwidth h; the shared normalizing constant cancels and is omitted.
    Self-densities use leave-one-out sums.  Returns (loss, g0, g1) where
    the gradients treat h as a constant; g0/g1 are None when compute_grad
    is false.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    n0, n1 = p0.shape[0], p1.shape[0]
    hh = float(h) * float(h)
    inv2 = -1.0 / (2.0 * hh)

    a00 = pairwise_sq_dists(p0, p0) * inv2
    a01 = pairwise_sq_dists(p0, p1) * inv2
    a11 = pairwise_sq_dists(p1, p1) * inv2
    a10 = a01.T

    l00, w00 = _logmeanexp_rows(a00, exclude_diag=True)
    l01, w01 = _logmeanexp_rows(a01, exclude_diag=False)
    l11, w11 = _logmeanexp_rows(a11, exclude_diag=True)
    l10, w10 = _logmeanexp_rows(a10, exclude_diag=False)

    loss = float(np.mean(l00 - l01) + np.mean(l11 - l10))
    if not compute_grad:
        return loss, None, None

    # Per ordered pair (i, j) the log-density terms contribute
    # +-w_ij * (x_j - x_i) / hh to the gradients of both endpoints; the
    # matrix forms below are those pair sums.  Row sums of each w are 1.
    c00 = np.sum(w00, axis=0)[:, None]
    c11 = np.sum(w11, axis=0)[:, None]
    c01 = np.sum(w01, axis=0)[:, None]
    c10 = np.sum(w10, axis=0)[:, None]

    g0 = (w00 @ p0 + w00.T @ p0 - c00 * p0 - w01 @ p1) / (n0 * hh)
    g0 += (c10 * p0 - w10.T @ p1) / (n1 * hh)
    g1 = (w11 @ p1 + w11.T @ p1 - c11 * p1 - w10 @ p0) / (n1 * hh)
    g1 += (c01 * p1 - w01.T @ p0) / (n0 * hh)
    return loss, g0, g1
