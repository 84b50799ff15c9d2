"""Deployment geometry, steering vectors and random channels.

All randomness flows through :class:`TrialStreams`, a counter-based
substream factory: ``(seed, trial, stream)`` fully determines every draw, so
trials can run in any order or in parallel and still reproduce bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from iaps.config import ScenarioConfig

# substream identifiers; fixed so that adding a stream never shifts another
STREAMS = {
    "layout": 0,
    "rap": 1,
    "channel_h": 2,
    "channel_g": 3,
    "rcs": 4,
    "symbols": 5,
    "noise": 6,
}


class TrialStreams:
    """Per-trial random substreams built on the Philox counter generator."""

    def __init__(self, seed: int, trial: int = 0):
        self.seed = int(seed)
        self.trial = int(trial)

    def stream(self, name: str) -> np.random.Generator:
        counter = [0, 0, STREAMS[name], self.trial]
        return np.random.Generator(np.random.Philox(key=self.seed, counter=counter))


def _rng(source, name: str) -> np.random.Generator:
    if isinstance(source, TrialStreams):
        return source.stream(name)
    return source


@dataclass(frozen=True)
class Layout:
    bs_pos: np.ndarray
    target_pos: np.ndarray
    rap_pos: np.ndarray  # (R, 2)
    ue_pos: np.ndarray  # (K, 2)
    theta: float
    phi: np.ndarray  # (R,)
    d_bs_ue: np.ndarray  # km
    d_bs_rap: np.ndarray  # km


@dataclass(frozen=True)
class ChannelSet:
    H: np.ndarray  # (M, K), column k is h_k
    G: np.ndarray  # (R, N1, M)
    a_theta: np.ndarray  # (M,)
    b0_theta: np.ndarray  # (N0,)
    b1_phi: np.ndarray  # (R, N1)

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]

    @property
    def R(self) -> int:
        return self.G.shape[0]

    def receive_steering(self, r: int) -> np.ndarray:
        """Receive steering vector of node r (0 is the BS)."""
        return self.b0_theta if r == 0 else self.b1_phi[r - 1]

    def response(self, r: int) -> np.ndarray:
        """Rank-one target response B_r = b_r a^H."""
        return np.outer(self.receive_steering(r), self.a_theta.conj())


def _azimuth(origin: np.ndarray, point: np.ndarray) -> float:
    d = point - origin
    angle = math.atan2(d[1], d[0])
    return math.pi if angle == -math.pi else angle


def generate_layout(config: ScenarioConfig, rng) -> Layout:
    """Uniform BS/UE/RAP positions with the target at the region center.

    BS and UE positions come from one substream and RAP positions from
    another, so sweeping R leaves the BS and UEs untouched.  Every array
    lies along the x axis and azimuths are measured from it.
    """
    side = config.region_m
    g = _rng(rng, "layout")
    bs = g.uniform(0.0, side, size=2)
    ue = g.uniform(0.0, side, size=(config.K, 2))
    rap = _rng(rng, "rap").uniform(0.0, side, size=(config.R, 2))
    target = np.array([side / 2.0, side / 2.0])

    theta = _azimuth(bs, target)
    phi = np.array([_azimuth(p, target) for p in rap])
    d_ue = np.linalg.norm(ue - bs, axis=1) / 1000.0
    d_rap = np.linalg.norm(rap - bs, axis=1) / 1000.0
    return Layout(bs, target, rap, ue, theta, phi, d_ue, d_rap)


def steering(angle: float, n: int, delta: float = 0.5) -> np.ndarray:
    """Uniform linear array response exp(j 2 pi m delta sin(angle))."""
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    m = np.arange(n)
    return np.exp(1j * 2.0 * np.pi * m * delta * np.sin(angle))


def path_loss_db(d_km):
    """Urban macro path loss 128.1 + 37.6 log10(d) with d in kilometers."""
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0) or np.any(~np.isfinite(d)):
        raise ValueError("distance must be positive and finite")
    out = 128.1 + 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def _cn(g: np.random.Generator, shape) -> np.ndarray:
    return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / math.sqrt(2.0)


def draw_channels(layout: Layout, config: ScenarioConfig, rng) -> ChannelSet:
    """Rayleigh channels scaled by path gain, plus steering vectors.

    h_k and G_r are drawn per node in node order, so a prefix of UEs or RAPs
    keeps the same channels when K or R grows.
    """
    K, R, M, N1 = config.K, config.R, config.M, config.N1
    if layout.ue_pos.shape[0] != K or layout.rap_pos.shape[0] != R:
        raise ValueError("layout does not match config dimensions")

    gain_ue = 10.0 ** (-np.asarray(path_loss_db(layout.d_bs_ue)) / 10.0)
    gh = _rng(rng, "channel_h")
    H = np.array([_cn(gh, M) for _ in range(K)]).reshape(K, M).T * np.sqrt(gain_ue)[None, :]

    if R:
        gain_rap = 10.0 ** (-np.asarray(path_loss_db(layout.d_bs_rap)) / 10.0)
        gg = _rng(rng, "channel_g")
        G = np.array([_cn(gg, (N1, M)) for _ in range(R)]) * np.sqrt(gain_rap)[:, None, None]
    else:
        G = np.zeros((0, N1, M), dtype=complex)

    a = steering(layout.theta, M, config.delta)
    b0 = steering(layout.theta, config.N0, config.delta)
    b1 = np.array([steering(p, N1, config.delta) for p in layout.phi]).reshape(R, N1)
    return ChannelSet(np.ascontiguousarray(H), G, a, b0, b1)


def draw_rcs(config: ScenarioConfig, rng) -> np.ndarray:
    """Swerling-I gains alpha_0..alpha_R, i.i.d. CN(0, sigma_rcs^2)."""
    g = _rng(rng, "rcs")
    return math.sqrt(config.sigma_rcs2) * _cn(g, config.R + 1)


def export_csv(path: str | Path, **arrays: np.ndarray) -> None:
    """Dump complex or real arrays, one row per element (name, index, re, im)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "index", "re", "im"])
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            for idx in np.ndindex(arr.shape):
                v = complex(arr[idx])
                w.writerow([name, ":".join(map(str, idx)), repr(v.real), repr(v.imag)])


def export_layout_csv(layout: Layout, path: str | Path) -> None:
    export_csv(path, bs_pos=layout.bs_pos, target_pos=layout.target_pos,
               rap_pos=layout.rap_pos, ue_pos=layout.ue_pos,
               theta=np.array([layout.theta]), phi=layout.phi,
               d_bs_ue=layout.d_bs_ue, d_bs_rap=layout.d_bs_rap)


def export_channels_csv(channels: ChannelSet, path: str | Path) -> None:
    export_csv(path, H=channels.H, G=channels.G, a_theta=channels.a_theta,
               b0_theta=channels.b0_theta, b1_phi=channels.b1_phi)
