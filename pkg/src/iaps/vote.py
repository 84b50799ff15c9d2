"""Decision fusion by voting over one-bit node decisions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

EXACT_LIMIT = 64


@dataclass(frozen=True)
class VoteConfig:
    n_voters: int
    pd_hat: float
    pfa_hat: float
    kappa: int

    def __post_init__(self) -> None:
        _check_kappa(self.kappa, self.n_voters)
        _check_prob(self.pd_hat, "pd_hat")
        _check_prob(self.pfa_hat, "pfa_hat")


def _check_kappa(kappa: int, n: int) -> None:
    if n < 1:
        raise ValueError("need at least one voter")
    if not 1 <= kappa <= n:
        raise ValueError(f"kappa must lie in 1..{n}, got {kappa}")


def _check_prob(p: float, name: str) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1]")


def _log_comb(n: int, i: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)


def binom_cdf(k: int, n: int, p: float) -> float:
    """P(Binom(n, p) <= k)."""
    if k < 0:
        return 0.0
    if k >= n or p <= 0.0:
        return 1.0
    if p >= 1.0:
        return 0.0
    i = np.arange(k + 1)
    if n <= EXACT_LIMIT:
        coef = np.array([math.comb(n, int(j)) for j in i], dtype=float)
        return float(np.sum(coef * p ** i * (1.0 - p) ** (n - i)))
    with np.errstate(divide="ignore"):
        logs = _log_comb(n, i) + i * np.log(p) + (n - i) * np.log1p(-p)
    return float(np.exp(logs).sum())


def error_prob(kappa: int, pd_hat: float, pfa_hat: float, n_voters: int) -> float:
    """Fusion error probability with equal priors.

    0.5 + 0.5 sum_{i<kappa} C(N, i) [pd^i (1-pd)^(N-i) - pfa^i (1-pfa)^(N-i)],
    i.e. the average of the miss and false-alarm probabilities of the
    at-least-kappa rule over N voters.
    """
    _check_kappa(kappa, n_voters)
    _check_prob(pd_hat, "pd_hat")
    _check_prob(pfa_hat, "pfa_hat")
    miss = binom_cdf(kappa - 1, n_voters, pd_hat)
    no_alarm = binom_cdf(kappa - 1, n_voters, pfa_hat)
    return 0.5 + 0.5 * (miss - no_alarm)


def beta(pd_hat: float, pfa_hat: float) -> float:
    """ln(pfa/pd) / ln((1 - pd)/(1 - pfa))."""
    if not (0.0 < pd_hat < 1.0 and 0.0 < pfa_hat < 1.0):
        raise ValueError("pd_hat and pfa_hat must lie in (0, 1)")
    if pd_hat == pfa_hat:
        raise ValueError("beta is undefined when pd_hat equals pfa_hat")
    return math.log(pfa_hat / pd_hat) / math.log((1.0 - pd_hat) / (1.0 - pfa_hat))


def optimal_kappa(pd_hat: float, pfa_hat: float, n_voters: int) -> int:
    """min(N, ceil(N / (1 + beta))), the minimizer of error_prob over kappa."""
    if n_voters < 1:
        raise ValueError("need at least one voter")
    if not pd_hat > pfa_hat:
        raise ValueError("optimal kappa requires pd_hat > pfa_hat")
    if pd_hat >= 1.0:
        return n_voters
    if pfa_hat <= 0.0:
        return 1
    b = beta(pd_hat, pfa_hat)
    return max(1, min(n_voters, math.ceil(n_voters / (1.0 + b))))


def fuse(bits, kappa: int) -> int:
    """1 when at least kappa voters report a target (ties go to H1)."""
    bits = np.asarray(bits)
    _check_kappa(kappa, bits.shape[-1])
    out = bits.sum(axis=-1) >= kappa
    return int(out) if out.ndim == 0 else out.astype(int)


def fused_pd(pd_hat: float, kappa: int, n_voters: int) -> float:
    """P(at least kappa of N independent voters fire) with common rate pd_hat."""
    _check_kappa(kappa, n_voters)
    return 1.0 - binom_cdf(kappa - 1, n_voters, pd_hat)


def fused_pd_heterogeneous(pds, kappa: int) -> float:
    """Exact at-least-kappa probability for independent voters with unequal rates."""
    pds = np.asarray(pds, dtype=float)
    _check_kappa(kappa, pds.size)
    # Poisson-binomial distribution by convolution
    dist = np.array([1.0])
    for p in pds:
        dist = np.convolve(dist, [1.0 - p, p])
    return float(dist[kappa:].sum())


@dataclass(frozen=True)
class VoteOutcome:
    pd_hat: float
    pfa_hat: float
    kappa: int
    fused_pd: float
    fused_pfa: float
    error: float


def vote_outcome(node_pds, pfa: float) -> VoteOutcome:
    """Average node rates, optimal kappa and the resulting fused rates.

    When the averaged detection rate does not exceed the false-alarm rate
    the nodes carry no information and kappa falls back to N (the most
    conservative rule).
    """
    node_pds = np.asarray(node_pds, dtype=float)
    n = node_pds.size
    pd_hat = float(node_pds.mean())
    kappa = optimal_kappa(pd_hat, pfa, n) if pd_hat > pfa else n
    return VoteOutcome(pd_hat, pfa, kappa, fused_pd(pd_hat, kappa, n), fused_pd(pfa, kappa, n),
                       error_prob(kappa, pd_hat, pfa, n))
