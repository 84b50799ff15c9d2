"""Two-degree-of-freedom chi-square kernel.

Maps false-alarm probabilities to GLRT thresholds and noncentrality to
detection probability through the first-order Marcum Q function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


def threshold_from_pfa(pfa: float) -> float:
    """Upper (1 - pfa) quantile of the central chi-square law with 2 DoF."""
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie in (0, 1)")
    return -2.0 * math.log(pfa)


def chi2_cdf_2dof(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, -np.expm1(-np.maximum(x, 0.0) / 2.0), 0.0)
    return float(out) if out.ndim == 0 else out


def _span(mean: float) -> tuple[int, int]:
    # Poisson(mean) mass outside this window is far below 1e-20
    half = 12.0 * math.sqrt(mean) + 40.0
    return max(0, int(math.floor(mean - half))), int(math.ceil(mean + half))


def _sf_scalar(xi: float, rho: float) -> float:
    if xi == 0.0:
        return 1.0
    mu = xi / 2.0
    if rho == 0.0:
        return math.exp(-mu)
    lam = rho / 2.0

    # Q1(sqrt(rho), sqrt(xi)) = sum_j Pois(j; lam) P(Pois(mu) <= j)
    jlo, jhi = _span(lam)
    jmu = _span(mu)[1]
    if jlo > jmu:
        # every weighted term has P(Pois(mu) <= j) = 1 to double precision
        return 1.0

    i = np.arange(0, jmu + 1)
    log_pmf_mu = i * math.log(mu) - mu - gammaln(i + 1)
    log_F = np.logaddexp.accumulate(log_pmf_mu)
    # log P(Pois(mu) > j) for j = 0..jmu-1, summed from the top to avoid 1 - F
    log_G = np.append(np.logaddexp.accumulate(log_pmf_mu[::-1])[::-1][1:], -np.inf)

    j = np.arange(jlo, jhi + 1)
    log_w = j * math.log(lam) - lam - gammaln(j + 1)

    if xi > 2.0 + rho:
        # survival is the small side: sum it directly
        lf = np.where(j <= jmu, log_F[np.minimum(j, jmu)], 0.0)
        return float(min(1.0, np.exp(log_w + lf).sum()))
    lg = np.where(j <= jmu, log_G[np.minimum(j, jmu)], -np.inf)
    cdf = float(np.exp(log_w + lg).sum())
    return max(0.0, 1.0 - cdf)


def noncentral_chi2_sf_2dof(xi, rho):
    """P(X > xi) for X noncentral chi-square with 2 DoF and noncentrality rho.

    Evaluated as a Poisson mixture of central laws (the Bessel series of the
    Marcum Q function) in log space, truncated where the omitted mass is
    below 1e-20.
    """
    xi_a = np.asarray(xi, dtype=float)
    rho_a = np.asarray(rho, dtype=float)
    if np.any(xi_a < 0) or np.any(rho_a < 0) or np.any(np.isnan(xi_a)) or np.any(np.isnan(rho_a)):
        raise ValueError("xi and rho must be nonnegative")
    if xi_a.ndim == 0 and rho_a.ndim == 0:
        return _sf_scalar(float(xi_a), float(rho_a))
    xb, rb = np.broadcast_arrays(xi_a, rho_a)
    out = np.empty(xb.shape)
    for idx in np.ndindex(xb.shape):
        out[idx] = _sf_scalar(float(xb[idx]), float(rb[idx]))
    return out


def pd_from_rho(rho, pfa: float):
    """Detection probability of the 2-DoF GLRT at false-alarm rate pfa."""
    return noncentral_chi2_sf_2dof(threshold_from_pfa(pfa), rho)


@dataclass(frozen=True)
class DetectionCurve:
    rho: np.ndarray
    xi: float
    pfa: float
    pd: np.ndarray


def detection_curve(rho, pfa: float) -> DetectionCurve:
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    xi = threshold_from_pfa(pfa)
    return DetectionCurve(rho, xi, pfa, np.atleast_1d(noncentral_chi2_sf_2dof(xi, rho)))


@dataclass(frozen=True)
class EmpiricalRates:
    pfa_hat: float
    pd_hat: float
    pfa_se: float
    pd_se: float


def empirical_pfa_pd(stats_h0, stats_h1, xi: float) -> EmpiricalRates:
    """Exceedance rates of xi under each hypothesis, with binomial errors.

    A statistic equal to the threshold counts as a detection.
    """
    s0 = np.asarray(stats_h0, dtype=float).ravel()
    s1 = np.asarray(stats_h1, dtype=float).ravel()
    if s0.size == 0 or s1.size == 0:
        raise ValueError("both hypotheses need at least one sample")
    pfa = float(np.mean(s0 >= xi))
    pd = float(np.mean(s1 >= xi))
    return EmpiricalRates(
        pfa, pd,
        math.sqrt(pfa * (1 - pfa) / s0.size),
        math.sqrt(pd * (1 - pd) / s1.size),
    )
