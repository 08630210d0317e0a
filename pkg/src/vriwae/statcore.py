"""Scalar and statistical kernels shared by every other module.

Numerically careful building blocks: stable log-weight arithmetic, standard
normal functions (including a Mills ratio that survives far into the tail),
streaming moments with an associative merge, signal-to-noise ratios of
replicate samples, and the quadrature oracle for negative moments of i.i.d.
averages that the test suite uses as independent ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import erfc, erfcx, gammaln, ndtri

__all__ = [
    "MomentAccumulator",
    "SnrValue",
    "log_sum_exp",
    "self_normalize",
    "normal_pdf",
    "normal_cdf",
    "normal_quantile",
    "mills_ratio",
    "snr_of_samples",
    "snr_stderr",
    "neg_moment_oracle",
    "NegMomentError",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def log_sum_exp(xs: Sequence[float] | np.ndarray) -> float:
    """log(sum(exp(xs))) computed with a max shift.

    Exact when all entries are equal; tolerates -inf entries.
    """
    arr = np.asarray(xs, dtype=float)
    if arr.size == 0:
        raise ValueError("empty log-sum-exp")
    m = float(np.max(arr))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(arr - m))))


def self_normalize(log_ws: Sequence[float] | np.ndarray) -> np.ndarray:
    """Normalized weights exp(log_w_j - LSE(log_ws)); sums to 1.

    Invariant to adding a constant to all log-weights, which is what makes
    self-normalized estimators insensitive to unknown normalizing constants.
    """
    arr = np.asarray(log_ws, dtype=float)
    if arr.size == 0:
        raise ValueError("empty log-sum-exp")
    shifted = arr - np.max(arr)
    w = np.exp(shifted)
    return w / np.sum(w)


def normal_pdf(u):
    """Standard normal density."""
    u = np.asarray(u, dtype=float)
    out = np.exp(-0.5 * u * u - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def normal_cdf(u):
    """Standard normal CDF via the complementary error function.

    Absolute error below 1e-15 for |u| <= 8.
    """
    u = np.asarray(u, dtype=float)
    out = 0.5 * erfc(-u / _SQRT2)
    return float(out) if out.ndim == 0 else out


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF; p must lie in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires p in (0, 1), got {p}")
    return float(ndtri(p))


def mills_ratio(u):
    """Mills ratio (1 - Phi(u)) / phi(u) for u > 0.

    Evaluated through the scaled complementary error function, so it stays
    accurate where both tail and density underflow (u up to ~1e7). Satisfies
    u/(u^2+1) < m(u) < 1/u for all u > 0.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("mills_ratio requires u > 0")
    out = _SQRT_HALF_PI * erfcx(arr / _SQRT2)
    return float(out) if out.ndim == 0 else out


@dataclass
class MomentAccumulator:
    """Streaming mean/variance accumulator with an associative merge.

    Holds the running count, mean and sum of squared deviations (m2).
    Single-writer; cross-worker reductions happen through :meth:`merge`,
    which is associative and order-independent up to floating rounding.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def add_samples(self, xs: np.ndarray) -> None:
        """Fold a batch of samples in one vectorized step."""
        xs = np.asarray(xs, dtype=float).ravel()
        n = xs.size
        if n == 0:
            return
        other = MomentAccumulator(
            count=n,
            mean=float(np.mean(xs)),
            m2=float(np.sum((xs - np.mean(xs)) ** 2)),
        )
        self.merge(other)

    def merge(self, other: "MomentAccumulator") -> None:
        """Chan et al. pairwise combination of two accumulators."""
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n

    def variance(self) -> float:
        """Unbiased (n-1) sample variance; requires count >= 2."""
        if self.count < 2:
            raise ValueError("variance requires at least 2 samples")
        return self.m2 / (self.count - 1)


@dataclass(frozen=True)
class SnrValue:
    """Empirical mean/variance/SNR of an estimator over replicates.

    snr is |mean|/sqrt(variance); any zero-variance sample yields the +inf
    sentinel (a legitimate outcome, e.g. the DREP estimator at the
    variational optimum produces constant draws), and a zero mean with
    positive variance yields snr = 0.
    """

    mean: float
    variance: float
    snr: float
    n_replicates: int
    snr_stderr: float = field(default=0.0)


def snr_stderr(snr: float, n: int) -> float:
    """Delta-method standard error of an empirical SNR.

    With m_hat and s_hat^2 the sample mean and variance of n replicates and
    SNR = |m|/s, a first-order expansion under approximate normality gives
    Var(SNR_hat) ~= 1/n + SNR^2 / (2(n-1)); the stderr is its square root.
    Returns 0 for the degenerate sentinel cases.
    """
    if n < 2 or not math.isfinite(snr):
        return 0.0
    return math.sqrt(1.0 / n + snr * snr / (2.0 * (n - 1)))


def snr_of_samples(samples: Sequence[float] | np.ndarray) -> SnrValue:
    """Mean, unbiased variance and SNR of a replicate sample."""
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size < 2:
        raise ValueError("snr_of_samples requires at least 2 samples")
    acc = MomentAccumulator()
    acc.add_samples(arr)
    return snr_from_moments(acc)


def snr_from_moments(acc: MomentAccumulator) -> SnrValue:
    """SnrValue from an accumulated replicate sweep."""
    mean = acc.mean
    var = acc.variance()
    snr = abs(mean) / math.sqrt(var) if var > 0.0 else math.inf
    return SnrValue(
        mean=mean,
        variance=var,
        snr=snr,
        n_replicates=acc.count,
        snr_stderr=snr_stderr(snr, acc.count),
    )


class NegMomentError(RuntimeError):
    """Quadrature for a negative moment failed to converge within budget."""

    def __init__(self, message: str, partial: float):
        super().__init__(f"{message} (partial estimate {partial!r})")
        self.partial = partial


def neg_moment_oracle(
    laplace_transform: Callable[[float], float],
    mu: float,
    n: int,
    *,
    rel_tail_tol: float = 1e-10,
    max_doublings: int = 60,
) -> float:
    """E[(mean of n i.i.d. weights)^(-mu)] via the Laplace-transform identity.

    Uses Gamma(mu)^-1 * integral_0^inf t^(mu-1) * L(t/n)^n dt, where L is the
    Laplace transform of a single weight. Integrates over (0, T] with adaptive
    Gauss-Kronrod panels, growing T until the last tail panel contributes less
    than ``rel_tail_tol`` relative mass. Returns math.inf when the tail mass
    fails to shrink across 3 successive doublings (divergent integral), and
    raises :class:`NegMomentError` if the doubling budget runs out without
    either verdict.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    log_gamma = gammaln(mu)

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 0.0
        lt = laplace_transform(t / n)
        if lt <= 0.0:
            return 0.0
        inner = (mu - 1.0) * math.log(t) + n * math.log(lt) - log_gamma
        return math.exp(inner) if inner < 700.0 else math.inf

    total = 0.0
    lo, hi = 0.0, 1.0
    stalled = 0
    prev_tail = math.inf
    for _ in range(max_doublings):
        panel = integrate.quad(integrand, lo, hi, limit=200, full_output=1)[0]
        total += panel
        if total > 0 and panel < rel_tail_tol * total:
            return total
        if panel >= prev_tail * 0.9:
            stalled += 1
            if stalled >= 3:
                return math.inf
        else:
            stalled = 0
        prev_tail = panel
        lo, hi = hi, 2.0 * hi
    raise NegMomentError("negative-moment quadrature did not converge", total)
