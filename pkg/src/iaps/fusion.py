"""Unlimited-backhaul detection: centralized signal fusion GLRT.

The CC stacks the BS echo and the RAP reflections (target-free path already
removed), estimates every alpha_r by least squares and thresholds the GLRT
statistic.  Statistics here are scaled by 2 relative to the log likelihood
ratio so that, for complex Gaussian noise, the null law is exactly a
chi-square with 2 DoF per unknown complex gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from iaps.precoding import PrecoderSet
from iaps.scenario import ChannelSet
from iaps.stats import pd_from_rho

COND_LIMIT = 1e12


class SingularModelError(ValueError):
    """The stacked normal matrix sum_l A^H A cannot be inverted."""


def draw_symbols(n_streams: int, L: int, rng: np.random.Generator) -> np.ndarray:
    """White complex Gaussian symbols renormalized so that S S^H = L I exactly."""
    if L < n_streams:
        raise ValueError("need at least as many slots as streams")
    S0 = (rng.standard_normal((L, n_streams)) + 1j * rng.standard_normal((L, n_streams))) / math.sqrt(2)
    Q, Rm = np.linalg.qr(S0)
    Q = Q * (np.diag(Rm) / np.abs(np.diag(Rm)))[None, :]
    return math.sqrt(L) * Q.conj().T


@dataclass(frozen=True)
class StackedModel:
    """Known parts of the stacked observation: A[l] = blkdiag(b_r a^H X[l])."""

    responses: list  # B_r matrices, r = 0..R
    X: np.ndarray  # (M, L) transmitted block

    @classmethod
    def build(cls, channels: ChannelSet, precoders: PrecoderSet, S: np.ndarray) -> "StackedModel":
        X = precoders.W @ S
        B = [channels.response(r) for r in range(channels.R + 1)]
        return cls(B, X)

    @property
    def node_dims(self) -> list[int]:
        return [B.shape[0] for B in self.responses]

    @property
    def L(self) -> int:
        return self.X.shape[1]

    def A(self) -> np.ndarray:
        """Dense A[l] for every slot, shape (L, sum N_r, R+1)."""
        dims = self.node_dims
        out = np.zeros((self.L, sum(dims), len(dims)), dtype=complex)
        start = 0
        for r, B in enumerate(self.responses):
            out[:, start:start + dims[r], r] = (B @ self.X).T
            start += dims[r]
        return out


def simulate_observation(channels: ChannelSet, precoders: PrecoderSet, alpha, S: np.ndarray,
                         sigma_ns2: float, rng: np.random.Generator,
                         direct_path: bool = False) -> list[np.ndarray]:
    """Received blocks z_r (N_r x L) for r = 0..R.

    ``alpha=None`` simulates H0.  The target-free path G_r X is added only
    when ``direct_path`` is set; the fusion center assumes it is removed.
    """
    X = precoders.W @ S
    L = S.shape[1]
    if X.shape[0] != channels.M:
        raise ValueError("precoder and channel dimensions disagree")
    if alpha is not None and len(alpha) != channels.R + 1:
        raise ValueError("need one gain per receiving node")
    sd = math.sqrt(sigma_ns2 / 2.0)
    out = []
    for r in range(channels.R + 1):
        n = len(channels.receive_steering(r))
        z = sd * (rng.standard_normal((n, L)) + 1j * rng.standard_normal((n, L)))
        if alpha is not None:
            z = z + alpha[r] * (channels.response(r) @ X)
        if direct_path and r > 0:
            z = z + channels.G[r - 1] @ X
        out.append(z)
    return out


def stack(observations: list[np.ndarray]) -> np.ndarray:
    """Per-node blocks to stacked slot vectors z[l], shape (L, sum N_r)."""
    return np.concatenate(observations, axis=0).T


def _normal_parts(z: np.ndarray, A: np.ndarray):
    # z: (..., L, D); A: (L, D, P)
    L, D, P = A.shape
    if z.shape[-2:] != (L, D):
        raise ValueError("observation shape does not match the model")
    flat = A.reshape(L * D, P)
    gram = flat.conj().T @ flat
    proj = z.reshape(z.shape[:-2] + (L * D,)) @ flat.conj()
    if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > COND_LIMIT:
        raise SingularModelError("sum_l A^H[l] A[l] is singular or ill-conditioned")
    return gram, proj


def estimate_alpha(z: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Least-squares gains (sum A^H A)^-1 (sum A^H z)."""
    gram, proj = _normal_parts(z, A)
    return np.linalg.solve(gram, proj[..., None])[..., 0]


def glrt_statistic(z: np.ndarray, A: np.ndarray, sigma_ns2: float):
    """Twice the GLRT log ratio: (2/sigma^2) (sum z^H A)(sum A^H A)^-1 (sum A^H z).

    Accepts a batch of stacked observations with shape (..., L, D).
    """
    gram, proj = _normal_parts(z, A)
    sol = np.linalg.solve(gram, proj[..., None])[..., 0]
    val = np.real(np.sum(proj.conj() * sol, axis=-1)) * 2.0 / sigma_ns2
    val = np.maximum(val, 0.0)
    return float(val) if np.ndim(val) == 0 else val


def fusion_threshold(pfa: float, n_nodes: int) -> float:
    """Exact null quantile of the fused statistic (2 DoF per node)."""
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie in (0, 1)")
    return float(chi2.isf(pfa, 2 * n_nodes))


def noncentrality_fusion(precoders: PrecoderSet, responses, L: int, sigma_rcs2: float,
                         sigma_ns2: float, nodes=None) -> float:
    """Noncentrality of the fused statistic.

    rho = (2 L sigma_rcs^2 / sigma_ns^2) * sum_r tr(B_r W_hat B_r^H), with
    noise normalized per antenna.  ``nodes`` restricts the sum (0 = BS), so
    active-only and passive-only parts add up to the full value.
    """
    W_hat = precoders.W_hat
    idx = range(len(responses)) if nodes is None else nodes
    total = 0.0
    for r in idx:
        B = responses[r]
        total += float(np.real(np.trace(B @ W_hat @ B.conj().T)))
    return 2.0 * L * sigma_rcs2 * total / sigma_ns2


def analytic_pd_fusion(rho, pfa: float):
    return pd_from_rho(rho, pfa)


def monte_carlo_pd(channels: ChannelSet, precoders: PrecoderSet, S: np.ndarray, sigma_rcs2: float,
                   sigma_ns2: float, pfa: float, trials: int, rng: np.random.Generator,
                   amplitude: str = "swerling", batch: int = 2000) -> tuple[float, float]:
    """Empirical detection rate of the fused GLRT and its binomial standard error.

    ``swerling`` draws every alpha_r from CN(0, sigma_rcs^2) per trial;
    ``fixed`` keeps |alpha_r|^2 = sigma_rcs^2 with a uniform random phase.
    The threshold is the exact null quantile for R+1 complex gains.
    """
    model = StackedModel.build(channels, precoders, S)
    A = model.A()
    P = A.shape[2]
    xi = fusion_threshold(pfa, P)
    sd = math.sqrt(sigma_ns2 / 2.0)
    hits = 0
    done = 0
    while done < trials:
        n = min(batch, trials - done)
        if amplitude == "swerling":
            alpha = math.sqrt(sigma_rcs2 / 2.0) * (rng.standard_normal((n, P)) + 1j * rng.standard_normal((n, P)))
        elif amplitude == "fixed":
            alpha = math.sqrt(sigma_rcs2) * np.exp(2j * math.pi * rng.random((n, P)))
        else:
            raise ValueError(f"unknown amplitude model {amplitude!r}")
        noise = sd * (rng.standard_normal((n,) + A.shape[:2]) + 1j * rng.standard_normal((n,) + A.shape[:2]))
        z = np.einsum("ldp,tp->tld", A, alpha) + noise
        hits += int(np.sum(glrt_statistic(z, A, sigma_ns2) >= xi))
        done += n
    pd = hits / trials
    return pd, math.sqrt(pd * (1.0 - pd) / trials)
