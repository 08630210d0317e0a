"""Pure-NumPy implementations of the hot per-replicate reductions.

Each function consumes a (replicates, samples) batch and returns one value
per replicate. The compiled extension in ``_kernels_cy`` mirrors these
routines loop-for-loop; both use the same max-shift normalization, so the
backends agree to floating rounding.
"""

from __future__ import annotations

import numpy as np


def _norm_weights(log_ws: np.ndarray, alpha: float) -> np.ndarray:
    y = (1.0 - alpha) * log_ws
    y -= y.max(axis=1, keepdims=True)
    w = np.exp(y)
    w /= w.sum(axis=1, keepdims=True)
    return w


def rep_estimates(log_ws: np.ndarray, partials: np.ndarray, alpha: float) -> np.ndarray:
    """Self-normalized weighted average of the partials, one per replicate."""
    log_ws = np.ascontiguousarray(log_ws, dtype=np.float64)
    partials = np.ascontiguousarray(partials, dtype=np.float64)
    nw = _norm_weights(log_ws, alpha)
    return np.einsum("ij,ij->i", nw, partials)


def drep_estimates(log_ws: np.ndarray, partials: np.ndarray, alpha: float) -> np.ndarray:
    """Weighted average with weights alpha*w + (1-alpha)*w^2 per sample."""
    log_ws = np.ascontiguousarray(log_ws, dtype=np.float64)
    partials = np.ascontiguousarray(partials, dtype=np.float64)
    nw = _norm_weights(log_ws, alpha)
    h = alpha * nw + (1.0 - alpha) * nw * nw
    return np.einsum("ij,ij->i", h, partials)


def bound_estimates(log_ws: np.ndarray, alpha: float) -> np.ndarray:
    """(1-alpha)^-1 * [LSE((1-alpha) log w) - log N] per replicate."""
    log_ws = np.ascontiguousarray(log_ws, dtype=np.float64)
    n = log_ws.shape[1]
    y = (1.0 - alpha) * log_ws
    m = y.max(axis=1)
    lse = m + np.log(np.exp(y - m[:, None]).sum(axis=1))
    return (lse - np.log(n)) / (1.0 - alpha)


def softmax_stats(
    xi: np.ndarray, beta: float, delta: float, lam: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Statistics of softmax(beta*xi) weights, one 4-tuple row per replicate.

    Returns (t_delta, t_mix, s_delta, max_xi) where
      t_delta = sum_j w_j^delta * xi_j
      t_mix   = sum_j (lam*w_j + (1-lam)*w_j^2) * xi_j
      s_delta = sum_j w_j^delta
      max_xi  = max_j xi_j.
    """
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    y = beta * xi
    y = y - y.max(axis=1, keepdims=True)
    w = np.exp(y)
    w /= w.sum(axis=1, keepdims=True)
    wd = w**delta
    t_delta = np.einsum("ij,ij->i", wd, xi)
    t_mix = np.einsum("ij,ij->i", lam * w + (1.0 - lam) * w * w, xi)
    s_delta = wd.sum(axis=1)
    max_xi = xi.max(axis=1)
    return t_delta, t_mix, s_delta, max_xi
