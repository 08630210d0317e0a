"""Monte Carlo estimators of the VR-IWAE bound and its gradients.

The bound estimate for one replicate is
    (1 - alpha)^-1 * [log mean_j w_j^(1-alpha)]
over N importance weights; the REP gradient weighs the per-sample partials
by the self-normalized weights softmax((1-alpha) log w), and the DREP
gradient replaces those weights with alpha*w + (1-alpha)*w^2 applied to the
sample-point-only partials. N = 1 recovers the single-sample bound estimate
for every alpha; alpha = 1 is rejected rather than special-cased (the same
limit is reachable with N = 1).

Replicate sweeps draw from per-chunk child RNG streams spawned from the seed
(fixed chunk size, independent of worker count), reduce through
:class:`~vriwae.statcore.MomentAccumulator` and merge in chunk order, so a
sweep is reproducible and embarrassingly parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .models import DREP, REP, Psi
from .statcore import MomentAccumulator, SnrValue, snr_from_moments

__all__ = [
    "EstimatorConfig",
    "GradSampleBatch",
    "grad_sample_batch",
    "vriwae_bound_estimate",
    "rep_gradient",
    "drep_gradient",
    "replicate_sweep",
    "bound_sweep",
    "crn_bound_gradient_fd",
    "CHUNK_REPLICATES",
]

# Replicates per RNG chunk. Chunk boundaries are part of the reproducibility
# contract: chunk c draws from SeedSequence(seed).spawn(...)[c], so results
# are identical for any worker count.
CHUNK_REPLICATES = 256


def _validate_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")


@dataclass(frozen=True)
class EstimatorConfig:
    """One gradient-estimator configuration.

    M outer averages of N importance samples each; psi selects the
    differentiated component and mode chooses the estimator.
    """

    m: int
    n: int
    alpha: float
    psi: Psi
    mode: str
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("M and N must be positive")
        _validate_alpha(self.alpha)
        if self.mode not in (REP, DREP):
            raise ValueError(f"mode must be 'rep' or 'drep', got {self.mode!r}")


@dataclass(frozen=True)
class GradSampleBatch:
    """One inner group of N samples: log-weights, normalized weights,
    partials, and (DREP only) the h-weights alpha*w + (1-alpha)*w^2."""

    log_ws: np.ndarray
    norm_ws: np.ndarray
    partials: np.ndarray
    h_weights: np.ndarray | None = None


def grad_sample_batch(model, n: int, alpha: float, psi: Psi, mode: str,
                      rng: np.random.Generator) -> GradSampleBatch:
    """Draw one group of N noise samples and assemble its weight batch."""
    _validate_alpha(alpha)
    model._check_mode(psi, mode)
    eps = model.sample_noise(rng, (n,))
    log_ws = np.asarray(model.log_weight(eps), dtype=float)
    partials = np.asarray(model.d_psi_log_weight(eps, psi, mode), dtype=float)
    y = (1.0 - alpha) * log_ws
    w = np.exp(y - np.max(y))
    norm_ws = w / np.sum(w)
    h = alpha * norm_ws + (1.0 - alpha) * norm_ws**2 if mode == DREP else None
    return GradSampleBatch(log_ws=log_ws, norm_ws=norm_ws, partials=partials,
                           h_weights=h)


def vriwae_bound_estimate(model, n: int, alpha: float,
                          rng: np.random.Generator) -> float:
    """Single-replicate estimate of the bound from N fresh noise draws."""
    if n < 1:
        raise ValueError("N must be positive")
    _validate_alpha(alpha)
    eps = model.sample_noise(rng, (n,))
    log_ws = np.asarray(model.log_weight(eps), dtype=float).reshape(1, n)
    return float(kernels.bound_estimates(np.ascontiguousarray(log_ws), alpha)[0])


def rep_gradient(model, cfg: EstimatorConfig, rng: np.random.Generator) -> float:
    """One draw of the self-normalized reparameterized gradient estimator."""
    if cfg.mode != REP:
        raise ValueError("rep_gradient requires cfg.mode == 'rep'")
    vals = [
        float(np.dot(b.norm_ws, b.partials))
        for b in (grad_sample_batch(model, cfg.n, cfg.alpha, cfg.psi, REP, rng)
                  for _ in range(cfg.m))
    ]
    return float(np.mean(vals))


def drep_gradient(model, cfg: EstimatorConfig, rng: np.random.Generator) -> float:
    """One draw of the doubly-reparameterized gradient estimator."""
    if cfg.mode != DREP:
        raise ValueError("drep_gradient requires cfg.mode == 'drep'")
    vals = [
        float(np.dot(b.h_weights, b.partials))
        for b in (grad_sample_batch(model, cfg.n, cfg.alpha, cfg.psi, DREP, rng)
                  for _ in range(cfg.m))
    ]
    return float(np.mean(vals))


def _chunk_layout(r: int) -> list[tuple[int, int]]:
    """(start, size) per chunk; fixed by R alone."""
    out = []
    start = 0
    while start < r:
        size = min(CHUNK_REPLICATES, r - start)
        out.append((start, size))
        start += size
    return out


def _grad_chunk(model, cfg: EstimatorConfig, size: int, seed_seq, fast: bool):
    rng = np.random.default_rng(seed_seq)
    rows = size * cfg.m
    if fast and hasattr(model, "grad_batch"):
        log_ws, partials = model.grad_batch(rng, rows, cfg.n, cfg.psi, cfg.mode)
    else:
        eps = model.sample_noise(rng, (rows, cfg.n))
        log_ws = np.asarray(model.log_weight(eps), dtype=float)
        partials = np.asarray(model.d_psi_log_weight(eps, cfg.psi, cfg.mode),
                              dtype=float)
        if partials.shape != log_ws.shape:
            partials = np.broadcast_to(partials, log_ws.shape)
    log_ws = np.ascontiguousarray(log_ws, dtype=np.float64)
    partials = np.ascontiguousarray(partials, dtype=np.float64)
    if cfg.mode == REP:
        est = kernels.rep_estimates(log_ws, partials, cfg.alpha)
    else:
        est = kernels.drep_estimates(log_ws, partials, cfg.alpha)
    if cfg.m > 1:
        est = est.reshape(size, cfg.m).mean(axis=1)
    acc = MomentAccumulator()
    acc.add_samples(est)
    return acc


def replicate_sweep(model, cfg: EstimatorConfig, r: int, *, workers: int = 1,
                    fast: bool = True) -> SnrValue:
    """R independent estimator draws reduced to an SnrValue.

    Deterministic given (cfg.seed, R): replicate chunks own child RNG
    streams and accumulators merge in chunk order, so worker count never
    changes the result. ``fast=False`` forces the generic full-noise path
    even when the model provides sufficient-statistic batch sampling.
    """
    if r < 2:
        raise ValueError("replicate_sweep requires R >= 2")
    model._check_mode(cfg.psi, cfg.mode)
    layout = _chunk_layout(r)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(layout))

    def job(i: int) -> MomentAccumulator:
        return _grad_chunk(model, cfg, layout[i][1], seeds[i], fast)

    if workers > 1 and len(layout) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(job, range(len(layout))))
    else:
        accs = [job(i) for i in range(len(layout))]
    total = MomentAccumulator()
    for acc in accs:
        total.merge(acc)
    return snr_from_moments(total)


def bound_sweep(model, n: int, alpha: float, r: int, seed: int, *,
                workers: int = 1, fast: bool = True) -> SnrValue:
    """R independent single-replicate bound estimates, reduced like a sweep."""
    if r < 2:
        raise ValueError("bound_sweep requires R >= 2")
    _validate_alpha(alpha)
    layout = _chunk_layout(r)
    seeds = np.random.SeedSequence(seed).spawn(len(layout))

    def job(i: int) -> MomentAccumulator:
        rng = np.random.default_rng(seeds[i])
        size = layout[i][1]
        if fast and hasattr(model, "bound_batch"):
            log_ws = model.bound_batch(rng, size, n)
        else:
            eps = model.sample_noise(rng, (size, n))
            log_ws = np.asarray(model.log_weight(eps), dtype=float)
        est = kernels.bound_estimates(
            np.ascontiguousarray(log_ws, dtype=np.float64), alpha)
        acc = MomentAccumulator()
        acc.add_samples(est)
        return acc

    if workers > 1 and len(layout) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(job, range(len(layout))))
    else:
        accs = [job(i) for i in range(len(layout))]
    total = MomentAccumulator()
    for acc in accs:
        total.merge(acc)
    return snr_from_moments(total)


def crn_bound_gradient_fd(model, psi: Psi, n: int, alpha: float, r: int,
                          seed: int, step: float = 1e-3) -> tuple[float, float]:
    """Common-random-number central difference of the bound in psi.

    For each replicate the same noise draws are re-evaluated at psi +/- step
    (parameters and sample map move together, matching the REP total
    derivative), giving an unbiasedness oracle for the REP estimator.
    Returns (mean, stderr) of the per-replicate difference quotients.
    """
    base = float(getattr(model, psi.block)[psi.k])
    hi_model = model.replace_psi(psi, base + step)
    lo_model = model.replace_psi(psi, base - step)
    layout = _chunk_layout(r)
    seeds = np.random.SeedSequence(seed).spawn(len(layout))
    acc = MomentAccumulator()
    for (_, size), ss in zip(layout, seeds):
        rng = np.random.default_rng(ss)
        eps = model.sample_noise(rng, (size, n))
        lw_hi = np.ascontiguousarray(hi_model.log_weight(eps), dtype=np.float64)
        lw_lo = np.ascontiguousarray(lo_model.log_weight(eps), dtype=np.float64)
        fd = (kernels.bound_estimates(lw_hi, alpha)
              - kernels.bound_estimates(lw_lo, alpha)) / (2.0 * step)
        acc.add_samples(fd)
    return acc.mean, math.sqrt(acc.variance() / acc.count)
