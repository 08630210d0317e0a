"""Closed-form asymptotic predictions for the two built-in models.

Each prediction is the leading-order (in the number of importance samples N)
value of a bound-gradient quantity: the gradient of the limiting bound, the
gradient of the 1/N variance-like correction, the asymptotic variance
constants of the two gradient estimators, the resulting SNR leading orders,
and the large-N expansion of the REP gradient mean.

Every product of exponentially large or small factors is assembled as a sum
of logarithms with a single final exponentiation; predictions expose the
signed log magnitude so collapsed high-dimensional regimes can be compared
without overflow (the ``value`` field saturates to +/-inf past float range,
``log_abs`` stays finite).

Only the two built-in model families have closed forms. For user models,
:func:`large_n_gradient_expansion` accepts externally supplied gradient moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AnalyticPrediction",
    "gaussian_predictions",
    "lingauss_predictions",
    "large_n_gradient_expansion",
    "drep_mean_candidates",
    "loglog_slope",
]


# Sign convention for the Gaussian model's per-sample DREP partial, as
# validated against the central finite-difference oracle: the partial is the
# constant theta_k - phi_k (target minus proposal), so the N = 1 DREP mean at
# the standard offset is +eps. Written derivations exist with either sign;
# the finite-difference check is what this package treats as ground truth.
GAUSSIAN_DREP_PARTIAL_SIGN = "target-minus-proposal"


@dataclass(frozen=True)
class AnalyticPrediction:
    """One closed-form value with its provenance.

    ``value`` is sign * exp(log_abs) and saturates to +/-inf when the
    magnitude exceeds float range; ``log_abs`` is always finite except for
    exact zeros (-inf). ``formula_id`` names the closed form; ``config``
    echoes the configuration the value was evaluated at.
    """

    kind: str
    value: float
    formula_id: str
    log_abs: float
    sign: int
    config: dict = field(default_factory=dict)


_KINDS = (
    "vr_bound_grad",
    "gamma_sq_grad",
    "v_rep",
    "v_drep",
    "snr_rep_leading",
    "snr_drep_leading",
    "mean_rep_expansion",
)


def _pred(kind: str, formula_id: str, sign: int, log_abs: float, config: dict
          ) -> AnalyticPrediction:
    assert kind in _KINDS
    if sign == 0 or log_abs == -math.inf:
        return AnalyticPrediction(kind, 0.0, formula_id, -math.inf, 0, config)
    value = math.inf if log_abs > 709.0 else math.exp(log_abs)
    return AnalyticPrediction(kind, sign * value, formula_id, log_abs, sign, config)


def _signed_log_sum(terms: list[tuple[int, float]]) -> tuple[int, float]:
    """Sum of sign*exp(log) terms, returned as (sign, log_abs)."""
    live = [(s, l) for s, l in terms if s != 0 and l > -math.inf]
    if not live:
        return 0, -math.inf
    m = max(l for _, l in live)
    acc = sum(s * math.exp(l - m) for s, l in live)
    if acc == 0.0:
        return 0, -math.inf
    return (1 if acc > 0 else -1), m + math.log(abs(acc))


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def gaussian_predictions(d: int, eps: float, alpha: float, n: int, m: int = 1,
                         k: int = 0) -> list[AnalyticPrediction]:
    """Predictions for the shifted Gaussian model at offset eps.

    The target sits at eps * ones with the proposal at the origin, so the
    squared parameter distance is d * eps^2. For alpha in (0, 1) the DREP
    asymptotic variance constant is exactly zero and no SNR constant exists
    (the SNR grows faster than sqrt(MN)); the DREP SNR leading order is
    emitted for alpha = 0 only.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    cfg = {"model": "gaussian", "d": d, "eps": eps, "alpha": alpha, "n": n,
           "m": m, "k": k}
    one_m_a = 1.0 - alpha
    b2 = one_m_a * one_m_a * d * eps * eps  # squared scale of the log-weight
    out = []

    out.append(_pred("vr_bound_grad", "gauss-vr-grad",
                     1 if alpha * eps > 0 else 0, _log(alpha * eps), cfg))
    out.append(_pred("gamma_sq_grad", "gauss-gamma2-grad",
                     -1 if eps > 0 else 0,
                     _log(2.0 * one_m_a * eps) + b2, cfg))
    out.append(_pred("v_rep", "gauss-v-rep", 1,
                     b2 + math.log1p(one_m_a * one_m_a * eps * eps), cfg))
    if alpha > 0.0:
        out.append(_pred("v_drep", "gauss-v-drep-zero", 0, -math.inf, cfg))
    else:
        de2 = d * eps * eps
        s, l = _signed_log_sum([
            (1, 4.0 * de2),
            (-1, math.log(4.0) + 2.0 * de2),
            (1, math.log(4.0) + de2),
            (-1, 0.0),
        ])
        out.append(_pred("v_drep", "gauss-v-drep0",
                         s if eps > 0 else 0,
                         2.0 * _log(eps) + 2.0 * de2 + l, cfg))
        out.append(_pred("snr_drep_leading", "gauss-drep-snr0",
                         1, 0.5 * math.log(m * n) - 0.5 * l, cfg))

    mn = 0.5 * math.log(m * n)
    half_den = 0.5 * math.log1p(one_m_a * one_m_a * eps * eps)
    if alpha > 0.0:
        out.append(_pred("snr_rep_leading", "gauss-rep-snr-leading",
                         1 if eps > 0 else 0,
                         mn + _log(eps * alpha) - 0.5 * b2 - half_den, cfg))
    else:
        out.append(_pred("snr_rep_leading", "gauss-rep-snr0",
                         1, 0.5 * math.log(m / n) + 0.5 * d * eps * eps
                         - 0.5 * math.log1p(eps * eps), cfg))

    s, l = _signed_log_sum([
        (1 if alpha * eps > 0 else 0, _log(eps * alpha)),
        (1 if eps > 0 else 0, _log(eps * one_m_a) + b2 - math.log(n)),
    ])
    out.append(_pred("mean_rep_expansion", "gauss-mean-expansion", s, l, cfg))
    return out


def lingauss_predictions(d: int, eps: float, alpha: float, n: int, m: int = 1,
                         k: int = 0, x_k: float = 0.0, theta_k: float = 0.0
                         ) -> list[AnalyticPrediction]:
    """Predictions for the linear Gaussian model at the standard offset.

    Assumes the proposal mean sits at (theta + x)/2 + eps * ones, i.e. the
    posterior-mismatch vector has every coordinate equal to 4*eps. The
    component coordinate values x_k and theta_k only enter the SNR of the
    target-parameter gradient.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    cfg = {"model": "lingauss", "d": d, "eps": eps, "alpha": alpha, "n": n,
           "m": m, "k": k, "x_k": x_k, "theta_k": theta_k}
    one_m_a = 1.0 - alpha
    four_a = 4.0 - alpha
    five_2a = 5.0 - 2.0 * alpha
    mn = 0.5 * math.log(m * n)
    out = []

    # gradient of the limiting bound
    vr_b = -6.0 * alpha * eps / four_a
    out.append(_pred("vr_bound_grad", "lingauss-vr-grad-b",
                     -1 if vr_b < 0 else 0, _log(abs(vr_b)), cfg))

    # gradient of the 1/N correction term (variational component)
    gamma_log = (math.log(48.0 * one_m_a) + (d - 1.0) * math.log(four_a)
                 - 0.5 * d * math.log(3.0)
                 - (0.5 * d + 1.0) * math.log(five_2a)
                 + 24.0 * one_m_a * one_m_a * d * eps * eps / (five_2a * four_a)
                 + _log(eps)) if eps > 0 else -math.inf
    out.append(_pred("gamma_sq_grad", "lingauss-gamma2-grad-b",
                     1 if eps > 0 else 0, gamma_log, cfg))

    # asymptotic REP variance constant for the target component; the
    # variational component's constant is 4x larger (chain rule through the
    # proposal mean), which cancels in the SNR displays below.
    bracket = 2.0 / five_2a + (12.0 * one_m_a * eps / (five_2a * four_a)) ** 2
    v_theta_log = (d * math.log(four_a) - 0.5 * d * math.log(15.0 - 6.0 * alpha)
                   + 24.0 * one_m_a * one_m_a * d * eps * eps / (four_a * five_2a)
                   + math.log(bracket))
    out.append(_pred("v_rep", "lingauss-v-rep-b",
                     1, math.log(4.0) + v_theta_log, cfg))

    # log of the common SNR denominator (sqrt of the theta-form constant)
    den_log = 0.5 * v_theta_log

    # REP SNR in the variational offset component: leading order plus the
    # full two-term numerator (the latter stays informative at alpha = 0)
    lead_num = 3.0 * eps * alpha / four_a
    out.append(_pred("snr_rep_leading", "lingauss-rep-b-snr-leading",
                     1 if lead_num > 0 else 0,
                     mn + _log(lead_num) - den_log, cfg))
    second_log = (math.log(12.0) + _log(eps) + math.log(one_m_a)
                  + (d - 1.0) * math.log(four_a)
                  + 24.0 * one_m_a * one_m_a * d * eps * eps / (five_2a * four_a)
                  - math.log(n) - 0.5 * d * math.log(3.0)
                  - (0.5 * d + 1.0) * math.log(five_2a)) if eps > 0 else -math.inf
    s_full, l_full = _signed_log_sum([
        (1 if lead_num > 0 else 0, _log(lead_num)),
        (1 if eps > 0 else 0, second_log),
    ])
    out.append(_pred("snr_rep_leading", "lingauss-rep-b-snr-full",
                     s_full, mn + l_full - den_log, cfg))

    # REP SNR in the target component
    theta_num = abs(0.5 * (x_k - theta_k) + 3.0 * eps * alpha / four_a)
    out.append(_pred("snr_rep_leading", "lingauss-rep-theta-snr",
                     1 if theta_num > 0 else 0,
                     mn + _log(theta_num) - den_log, cfg))

    if alpha > 0.0:
        out.append(_pred("v_drep", "lingauss-v-drep-b",
                         1, 2.0 * math.log(alpha / 2.0) + v_theta_log, cfg))
        out.append(_pred("snr_drep_leading", "lingauss-drep-b-snr",
                         1 if lead_num > 0 else 0,
                         math.log(4.0 / alpha) + mn + _log(lead_num) - den_log,
                         cfg))
    else:
        s0, l0 = _lingauss_v_drep0_log(d, eps)
        out.append(_pred("v_drep", "lingauss-v-drep0-b", s0, l0, cfg))
        num_log = (math.log(24.0) + _log(eps) + (d - 1.0) * math.log(4.0)
                   + 1.2 * d * eps * eps - 0.5 * d * math.log(3.0)
                   - (0.5 * d + 1.0) * math.log(5.0)) if eps > 0 else -math.inf
        out.append(_pred("snr_drep_leading", "lingauss-drep-b-snr0",
                         1 if eps > 0 else 0, mn + num_log - 0.5 * l0, cfg))
    return out


def _lingauss_v_drep0_log(d: int, eps: float) -> tuple[int, float]:
    """Signed log of the alpha = 0 DREP asymptotic variance constant.

    Four exponential-scale terms with mixed signs, combined in log space;
    the squared-mismatch coordinate is mu_k = 4*eps with |mu|^2 = 16*d*eps^2.
    """
    de2 = d * eps * eps
    mu_k2 = 16.0 * eps * eps
    t1 = (1, math.log(0.25) + 2.0 * d * math.log(4.0 / 3.0)
          + 0.5 * d * math.log(3.0 / 7.0) + (36.0 / 7.0) * de2
          + math.log(2.0 / 7.0 + (12.0 * eps / 7.0) ** 2))
    if eps > 0:
        t2 = (-1, 1.5 * d * math.log(4.0 / 3.0) + 0.5 * d * math.log(0.5)
              + 3.0 * de2 + math.log(0.3) + d * math.log(4.0)
              - 0.5 * d * math.log(15.0) + 1.2 * de2 + math.log(mu_k2))
        base3 = math.log(0.09) + math.log(mu_k2)
        t3a = (1, base3 + math.log(4.0) + 3.0 * d * math.log(4.0)
               - 1.5 * d * math.log(15.0) + 3.6 * de2)
        t3b = (-1, base3 + 2.0 * d * math.log(4.0) - d * math.log(15.0)
               + 2.4 * de2)
        return _signed_log_sum([t1, t2, t3a, t3b])
    return _signed_log_sum([t1])


def large_n_gradient_expansion(d_vr: float, d_gamma_sq: float, n: int) -> float:
    """Large-N expansion of the REP gradient mean: d_vr - d_gamma_sq/(2N).

    The caller supplies the gradient of the limiting bound and of the 1/N
    correction; for the built-in models these come from
    :func:`gaussian_predictions` / :func:`lingauss_predictions`, and a user
    model can plug in its own moments here.
    """
    if n < 1:
        raise ValueError("N must be positive")
    return d_vr - d_gamma_sq / (2.0 * n)


def drep_mean_candidates(eps: float, alpha: float) -> list[tuple[str, float]]:
    """The two candidate references for the DREP gradient mean.

    The fixed-d large-N limit equals the gradient of the limiting bound
    (eps * alpha here), while the high-dimensional collapse limit equals the
    N = 1 mean, i.e. the offset itself under this package's sign convention
    (the per-sample DREP partial is target-minus-proposal). Both are
    recorded; neither is asserted, since they apply in different regimes.
    """
    return [
        ("drep-mean-vr-limit", eps * alpha),
        ("drep-mean-n1-highdim", eps),
    ]


def loglog_slope(ns, values) -> float:
    """Least-squares slope of log(value) against log(n).

    Used to report empirical SNR growth-rate exponents where the theory
    gives only a faster-than-sqrt(MN) statement without a constant.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (ns > 0) & (values > 0) & np.isfinite(values)
    if mask.sum() < 2:
        raise ValueError("need at least two positive points for a slope")
    return float(np.polyfit(np.log(ns[mask]), np.log(values[mask]), 1)[0])
