"""RZF communication precoders, ZFR sensing precoder and per-UE SINR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from iaps.config import ScenarioConfig
from iaps.scenario import ChannelSet

COND_LIMIT = 1e12


class DegenerateGeometryError(ValueError):
    """The sensing direction lies inside the span of the UE channels."""


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # first nonzero entry made real and nonnegative
    mag = np.abs(v)
    idx = int(np.argmax(mag > 1e-14 * mag.max())) if mag.max() > 0 else 0
    if mag[idx] == 0:
        return v
    return v * (np.conj(v[idx]) / mag[idx])


def _unit_columns(V: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(V, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero precoder column")
    V = V / norms
    return np.column_stack([_fix_phase(V[:, k]) for k in range(V.shape[1])])


@dataclass(frozen=True)
class PrecoderSet:
    """Unit-norm precoders (column 0 senses, 1..K serve UEs) and powers in mW."""

    w_tilde: np.ndarray  # (M, K+1)
    p: np.ndarray = field(default=None)  # (K+1,)

    def __post_init__(self) -> None:
        if self.p is None:
            object.__setattr__(self, "p", np.zeros(self.w_tilde.shape[1]))
        p = np.asarray(self.p, dtype=float)
        if p.shape != (self.w_tilde.shape[1],):
            raise ValueError("power vector length must equal number of streams")
        if np.any(p < 0):
            raise ValueError("powers must be nonnegative")
        object.__setattr__(self, "p", p)

    @property
    def K(self) -> int:
        return self.w_tilde.shape[1] - 1

    @property
    def W(self) -> np.ndarray:
        return self.w_tilde * np.sqrt(self.p)[None, :]

    @property
    def W_hat(self) -> np.ndarray:
        W = self.W
        return W @ W.conj().T

    def with_power(self, p) -> "PrecoderSet":
        return PrecoderSet(self.w_tilde, np.asarray(p, dtype=float))


def rzf(H: np.ndarray, lam: float) -> np.ndarray:
    """Regularized zero-forcing directions, normalized to unit norm.

    Uses the push-through form H (H^H H + lam I)^-1, equal to
    (H H^H + lam I)^-1 H and well defined at lam = 0 for full column rank H.
    """
    if lam < 0:
        raise ValueError("regularization must be nonnegative")
    K = H.shape[1]
    gram = H.conj().T @ H + lam * np.eye(K)
    if lam == 0 and np.linalg.cond(gram) > COND_LIMIT:
        raise np.linalg.LinAlgError("rank-deficient channel matrix with lam = 0")
    W = H @ np.linalg.solve(gram, np.eye(K))
    return _unit_columns(W)


def zfr(H: np.ndarray, a_theta: np.ndarray, mode: str = "projection") -> np.ndarray:
    """Sensing precoder that avoids leaking into the UE channels.

    ``projection`` projects a(theta) onto the orthogonal complement of the
    column space of H, which nulls every UE exactly.  ``paper-literal``
    evaluates (I - H H^H)^-1 a(theta), falling back to a Tikhonov-regularized
    solve when that matrix is ill-conditioned.
    """
    M, K = H.shape
    if K >= M:
        raise ValueError("zero-forcing radar requires K < M")
    a = np.asarray(a_theta, dtype=complex)
    if mode == "projection":
        if np.any(H):
            U, s, _ = np.linalg.svd(H, full_matrices=False)
            rank = int(np.sum(s > s[0] * 1e-12))
            U = U[:, :rank]
            w = a - U @ (U.conj().T @ a)
        else:
            w = a.copy()
    elif mode == "paper-literal":
        A = np.eye(M) - H @ H.conj().T
        if np.linalg.cond(A) > COND_LIMIT:
            eps = 1e-12 * np.linalg.norm(A, 2) ** 2
            w = np.linalg.solve(A.conj().T @ A + eps * np.eye(M), A.conj().T @ a)
        else:
            w = np.linalg.solve(A, a)
    else:
        raise ValueError(f"unknown zfr mode {mode!r}")
    if np.linalg.norm(w) <= 1e-10 * np.linalg.norm(a):
        raise DegenerateGeometryError("steering vector lies in the UE channel span")
    return _fix_phase(w / np.linalg.norm(w))


def build_precoders(channels: ChannelSet, config: ScenarioConfig) -> PrecoderSet:
    w0 = zfr(channels.H, channels.a_theta, config.zfr_mode)
    Wc = rzf(channels.H, config.rzf_reg)
    return PrecoderSet(np.column_stack([w0, Wc]))


def coupling(H: np.ndarray, precoders: PrecoderSet) -> np.ndarray:
    """Squared couplings |h_k^H w_j|^2 as a (K, K+1) array."""
    return np.abs(H.conj().T @ precoders.w_tilde) ** 2


def sinr_all(H: np.ndarray, precoders: PrecoderSet, sigma_nc2: float) -> np.ndarray:
    g = coupling(H, precoders) * precoders.p[None, :]
    K = H.shape[1]
    own = g[np.arange(K), np.arange(K) + 1]
    return own / (g.sum(axis=1) - own + sigma_nc2)


def sinr(H: np.ndarray, precoders: PrecoderSet, k: int, sigma_nc2: float) -> float:
    """SINR of UE k (1-based), counting sensing-stream leakage as interference."""
    if not 1 <= k <= H.shape[1]:
        raise IndexError("UE index must lie in 1..K")
    return float(sinr_all(H, precoders, sigma_nc2)[k - 1])


def beam_gain(precoders: PrecoderSet, a_theta: np.ndarray) -> np.ndarray:
    """Per-stream gains |a^H w_k|^2 toward the target."""
    return np.abs(a_theta.conj() @ precoders.w_tilde) ** 2
