"""Limited-backhaul detection: per-node matched filter and local GLRT.

Each node matched-filters its L slots against the known symbols, whitens by
the interference-plus-noise covariance and thresholds a one-bit decision.
As in the fusion detector, statistics carry a factor 2 so that the null law
is exactly chi-square with 2 DoF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from iaps.precoding import PrecoderSet
from iaps.scenario import ChannelSet, steering
from iaps.stats import pd_from_rho, threshold_from_pfa


class DegenerateDetectorError(ValueError):
    """The detector has no beam energy toward the hypothesized target."""


@dataclass(frozen=True)
class DetectorReport:
    statistic: float
    threshold: float
    decision: int
    rho: float
    pd: float


@dataclass(frozen=True)
class LocalDetector:
    """Node r's whitened detector (r = 0 is the BS)."""

    node: int
    Q_tilde: np.ndarray
    U: np.ndarray  # U U^H = Q_tilde^-1
    zeta: float
    rho: float

    @property
    def pd(self) -> float:
        return float(pd_from_rho(self.rho, math.exp(-self.zeta / 2.0)))


def matched_filter(z: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Z_tilde = (1/sqrt(L)) sum_l z[l] s[l]^H for z of shape (..., N, L)."""
    L = S.shape[1]
    if z.shape[-1] != L:
        raise ValueError("slot count of observations and symbols differ")
    return (z @ S.conj().T) / math.sqrt(L)


def interference_cov(G, W_hat: np.ndarray, sigma_ns2: float, n: int | None = None) -> np.ndarray:
    """Q_tilde = G W_hat G^H + sigma^2 I; ``G=None`` gives the BS form sigma^2 I."""
    if G is None:
        if n is None:
            raise ValueError("receive dimension needed when G is None")
        return sigma_ns2 * np.eye(n, dtype=complex)
    Q = G @ W_hat @ G.conj().T
    Q = 0.5 * (Q + Q.conj().T)
    return Q + sigma_ns2 * np.eye(G.shape[0])


def whitener(Q_tilde: np.ndarray) -> np.ndarray:
    """U = C^-H from the Cholesky factor Q = C C^H, so U^H Q U = I."""
    C = np.linalg.cholesky(Q_tilde)
    return np.linalg.inv(C).conj().T


def _beam_energy(B: np.ndarray, W_hat: np.ndarray, Qinv: np.ndarray) -> float:
    return float(np.real(np.trace(B @ W_hat @ B.conj().T @ Qinv)))


def local_glrt(Z: np.ndarray, precoders: PrecoderSet, B: np.ndarray, Q_tilde: np.ndarray):
    """2 |tr(Z W^H B^H Q^-1)|^2 / tr(B W_hat B^H Q^-1), known-angle form.

    ``Z`` may carry leading batch axes.
    """
    Qinv = np.linalg.inv(Q_tilde)
    den = _beam_energy(B, precoders.W_hat, Qinv)
    if den <= 0:
        raise DegenerateDetectorError("zero beam energy toward the target")
    # tr(Z W^H B^H Q^-1) = sum(Z * conj(Q^-1 B W)) with Q^-1 Hermitian
    kernel = Qinv @ B @ precoders.W
    t = np.sum(Z * kernel.conj(), axis=(-2, -1))
    val = 2.0 * np.abs(t) ** 2 / den
    return float(val) if np.ndim(val) == 0 else val


def angle_grid(resolution_deg: float = 1.0) -> np.ndarray:
    """Candidate azimuths over (-90, 90] degrees, the unambiguous ULA sector."""
    n = int(round(180.0 / resolution_deg))
    return np.deg2rad(-90.0 + resolution_deg * np.arange(1, n + 1))


def local_glrt_grid(Z: np.ndarray, precoders: PrecoderSet, Q_tilde: np.ndarray,
                    rx_angles: np.ndarray, tx_angles: np.ndarray, delta: float = 0.5):
    """Local GLRT maximized over (receive, transmit) angle pairs.

    Returns (statistic, phi_hat, theta_hat).  With B = b a^H the statistic
    separates as 2 |b^H Q^-1 Z W^H a|^2 / ((b^H Q^-1 b)(a^H W_hat a)).
    """
    n, M = Z.shape[0], precoders.W.shape[0]
    Qinv = np.linalg.inv(Q_tilde)
    Bg = np.column_stack([steering(x, n, delta) for x in rx_angles])
    Ag = np.column_stack([steering(x, M, delta) for x in tx_angles])
    num = np.abs(Bg.conj().T @ Qinv @ Z @ precoders.W.conj().T @ Ag) ** 2
    den = np.outer(np.real(np.sum(Bg.conj() * (Qinv @ Bg), axis=0)),
                   np.real(np.sum(Ag.conj() * (precoders.W_hat @ Ag), axis=0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(den > 0, 2.0 * num / den, 0.0)
    i, j = np.unravel_index(int(np.argmax(stat)), stat.shape)
    return float(stat[i, j]), float(rx_angles[i]), float(tx_angles[j])


def local_signature(B: np.ndarray, W: np.ndarray, L: int) -> np.ndarray:
    """d = sqrt(L) vec(B W), column-major, the target signature in vec(Z_tilde)."""
    return math.sqrt(L) * (B @ W).reshape(-1, order="F")


def mle_alpha_local(z_vec: np.ndarray, d: np.ndarray, C: np.ndarray) -> complex:
    """Whitened least squares d^H C^-1 z / d^H C^-1 d."""
    Cinv_d = np.linalg.solve(C, d)
    den = np.vdot(d, Cinv_d)
    if abs(den) == 0:
        raise DegenerateDetectorError("zero steering energy")
    return complex(np.vdot(Cinv_d, z_vec) / den)


def mle_alpha_blocks(Z: np.ndarray, B: np.ndarray, precoders: PrecoderSet, Q_tilde: np.ndarray,
                     L: int) -> complex:
    """Same estimate using the block-diagonal structure of C = I kron Q_tilde."""
    Qinv = np.linalg.inv(Q_tilde)
    den = _beam_energy(B, precoders.W_hat, Qinv)
    if den <= 0:
        raise DegenerateDetectorError("zero steering energy")
    t = np.sum(Z * (Qinv @ B @ precoders.W).conj())
    return complex(t / (math.sqrt(L) * den))


def noncentrality_local(precoders: PrecoderSet, B: np.ndarray, Q_tilde: np.ndarray, L: int,
                        sigma_rcs2: float) -> float:
    """rho_r = 2 L sigma_rcs^2 tr(B W_hat B^H Q_tilde^-1).

    For the BS pass Q_tilde = sigma^2 I of its own receive dimension.
    """
    Qinv = np.linalg.inv(Q_tilde)
    return 2.0 * L * sigma_rcs2 * _beam_energy(B, precoders.W_hat, Qinv)


def local_decision(statistic, zeta: float):
    """One-bit decision; a statistic equal to the threshold votes for a target."""
    out = np.asarray(statistic) >= zeta
    return int(out) if out.ndim == 0 else out.astype(int)


def node_covariances(channels: ChannelSet, precoders: PrecoderSet, sigma_ns2: float) -> list[np.ndarray]:
    W_hat = precoders.W_hat
    out = [interference_cov(None, W_hat, sigma_ns2, len(channels.b0_theta))]
    out += [interference_cov(channels.G[r], W_hat, sigma_ns2) for r in range(channels.R)]
    return out


def local_rhos(channels: ChannelSet, precoders: PrecoderSet, L: int, sigma_rcs2: float,
               sigma_ns2: float) -> np.ndarray:
    """rho_0..rho_R for every node."""
    covs = node_covariances(channels, precoders, sigma_ns2)
    return np.array([noncentrality_local(precoders, channels.response(r), covs[r], L, sigma_rcs2)
                     for r in range(channels.R + 1)])


def build_local_detectors(channels: ChannelSet, precoders: PrecoderSet, L: int, sigma_rcs2: float,
                          sigma_ns2: float, pfa: float) -> list[LocalDetector]:
    zeta = threshold_from_pfa(pfa)
    covs = node_covariances(channels, precoders, sigma_ns2)
    out = []
    for r, Q in enumerate(covs):
        rho = noncentrality_local(precoders, channels.response(r), Q, L, sigma_rcs2)
        out.append(LocalDetector(r, Q, whitener(Q), zeta, rho))
    return out


def simulate_node(channels: ChannelSet, precoders: PrecoderSet, r: int, alpha_r, S: np.ndarray,
                  sigma_ns2: float, rng: np.random.Generator, interference: str = "independent",
                  batch: tuple = ()) -> np.ndarray:
    """Raw slots z_r (N_r x L) at node r, optionally batched.

    ``interference`` selects how the target-free path enters a RAP:
    ``independent`` drives G_r W with fresh white symbols (covariance Q_r per
    slot, uncorrelated with the matched filter), ``coherent`` uses the actual
    transmit block G_r W S, and ``none`` drops it.
    """
    n = len(channels.receive_steering(r))
    L = S.shape[1]
    shape = tuple(batch) + (n, L)
    sd = math.sqrt(sigma_ns2 / 2.0)
    z = sd * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    W = precoders.W
    if alpha_r is not None:
        sig = channels.response(r) @ W @ S
        z = z + np.asarray(alpha_r)[..., None, None] * sig
    if r > 0 and interference != "none":
        G = channels.G[r - 1]
        if interference == "coherent":
            z = z + G @ W @ S
        elif interference == "independent":
            k = S.shape[0]
            s_shape = tuple(batch) + (k, L)
            S2 = (rng.standard_normal(s_shape) + 1j * rng.standard_normal(s_shape)) / math.sqrt(2)
            z = z + (G @ W) @ S2
        else:
            raise ValueError(f"unknown interference mode {interference!r}")
    return z


def detect_node(detector: LocalDetector, Z: np.ndarray, precoders: PrecoderSet, B: np.ndarray) -> DetectorReport:
    stat = local_glrt(Z, precoders, B, detector.Q_tilde)
    return DetectorReport(stat, detector.zeta, local_decision(stat, detector.zeta),
                          detector.rho, detector.pd)
