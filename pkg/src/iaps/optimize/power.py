"""SINR-constrained power allocation.

With fixed unit-norm precoders every per-UE SINR constraint is linear in the
power vector once the second-order-cone form is squared:

    sum_{j != k} rho_kj^2 p_j - (rho_kk^2 / Gamma) p_k <= -sigma^2.

The unlimited-backhaul problem maximizes a linear beam-energy objective
under these rows and the power budget; the limited-backhaul heuristic walks
the sensing power down from the budget, solving a minimum-power problem for
the communication streams at every step.

All LPs are posed in scaled units (powers divided by a reference power, QoS
rows divided by sigma^2) so that their coefficients are of order one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from iaps.config import ScenarioConfig, db_to_lin
from iaps.local import local_rhos
from iaps.optimize.lp import simplex
from iaps.precoding import PrecoderSet, build_precoders
from iaps.scenario import ChannelSet, TrialStreams, draw_channels, generate_layout
from iaps.stats import pd_from_rho
from iaps.vote import vote_outcome

ZERO_REL = 1e-12


@dataclass(frozen=True)
class QosRow:
    """SINR requirement of UE k (1-based) with couplings rho_kj = |h_k^H w_j|."""

    k: int
    rho: np.ndarray  # (K+1,)
    gamma: float
    sigma_nc2: float

    @property
    def own(self) -> float:
        return float(self.rho[self.k])

    @property
    def infeasible(self) -> bool:
        return self.own == 0.0

    def coefficients(self) -> np.ndarray:
        """Row of the squared form, left-hand side over p_0..p_K."""
        a = self.rho ** 2
        a[self.k] = -self.own ** 2 / self.gamma
        return a

    def soc_satisfied(self, p, tol: float = 0.0) -> bool:
        """|| [rho_kj sqrt(p_j)]_{j != k}, sigma || <= rho_kk sqrt(p_k / Gamma)."""
        p = np.asarray(p, dtype=float)
        terms = np.delete(self.rho * np.sqrt(p), self.k)
        lhs = math.sqrt(float(np.sum(terms ** 2)) + self.sigma_nc2)
        return lhs <= self.own * math.sqrt(p[self.k] / self.gamma) * (1.0 + tol)


@dataclass(frozen=True)
class AllocationResult:
    p: np.ndarray  # (K+1,) powers in mW
    status: str  # optimal | infeasible | degenerate
    objective: float
    slacks: np.ndarray  # QoS rows in units of sigma^2, then budget as a fraction of P_max
    gap: float
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def build_qos_rows(H: np.ndarray, precoders: PrecoderSet, gamma_db: float, sigma_nc2: float) -> list[QosRow]:
    """Per-UE rows; couplings below 1e-12 of the row maximum are set to zero."""
    rho = np.abs(H.conj().T @ precoders.w_tilde)
    gamma = db_to_lin(gamma_db)
    rows = []
    for k in range(1, rho.shape[1]):
        r = rho[k - 1].copy()
        r[r < ZERO_REL * r.max()] = 0.0
        rows.append(QosRow(k, r, gamma, sigma_nc2))
    return rows


def qos_system(rows: list[QosRow]) -> tuple[np.ndarray, np.ndarray]:
    """Scaled system A p <= b with A in units of 1/sigma^2 and b = -1."""
    A = np.array([row.coefficients() / row.sigma_nc2 for row in rows])
    return A, -np.ones(len(rows))


def objective_gains(channels: ChannelSet, precoders: PrecoderSet, nodes=None) -> np.ndarray:
    """c_k = sum_r ||B_r w_k||^2, the beam energy stream k delivers to all receivers."""
    idx = range(channels.R + 1) if nodes is None else nodes
    c = np.zeros(precoders.w_tilde.shape[1])
    for r in idx:
        c += np.sum(np.abs(channels.response(r) @ precoders.w_tilde) ** 2, axis=0)
    return c


def replay_sinr(rows: list[QosRow], p) -> np.ndarray:
    """SINR of every UE recomputed directly from the couplings."""
    p = np.asarray(p, dtype=float)
    out = []
    for row in rows:
        g = row.rho ** 2 * p
        own = g[row.k]
        out.append(own / (g.sum() - own + row.sigma_nc2))
    return np.array(out)


def _infeasible(n: int, iterations: int = 0, status: str = "infeasible") -> AllocationResult:
    return AllocationResult(np.full(n, np.nan), status, float("nan"), np.array([]), float("nan"), iterations)


def solve_p2(rows: list[QosRow], c, p_max_mw: float, sensing: bool = True) -> AllocationResult:
    """Maximize sum_k c_k p_k under the QoS rows and sum p <= P_max.

    ``sensing=False`` removes the dedicated sensing stream (p_0 = 0).
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    if any(row.infeasible for row in rows):
        return _infeasible(n)
    A, b = qos_system(rows)
    cols = np.arange(n) if sensing else np.arange(1, n)
    Aq = A[:, cols] * p_max_mw
    Aub = np.vstack([Aq, np.ones(cols.size)])
    bub = np.append(b, 1.0)
    cmax = float(np.max(np.abs(c[cols]))) or 1.0
    res = simplex(c[cols] / cmax, Aub, bub, maximize=True)
    if res.status == "infeasible":
        return _infeasible(n, res.iterations)
    if res.status != "optimal":
        return _infeasible(n, res.iterations, "degenerate")
    p = np.zeros(n)
    p[cols] = res.x * p_max_mw
    return AllocationResult(p, "optimal", float(c @ p), res.slacks, res.gap, res.iterations)


def solve_pa(rows: list[QosRow], p0_fixed: float) -> AllocationResult:
    """Minimize sum_{k>=1} p_k under the QoS rows with p_0 held fixed."""
    if p0_fixed < 0:
        raise ValueError("p0 must be nonnegative")
    n = len(rows) + 1
    if any(row.infeasible for row in rows):
        return _infeasible(n)
    A, b = qos_system(rows)
    # reference power: the largest single-user requirement
    scale = max(row.gamma * row.sigma_nc2 / row.own ** 2 for row in rows)
    Aq = A[:, 1:] * scale
    bq = b - A[:, 0] * p0_fixed
    res = simplex(np.ones(n - 1), Aq, bq, maximize=False)
    if res.status == "infeasible":
        return _infeasible(n, res.iterations)
    if res.status != "optimal":
        return _infeasible(n, res.iterations, "degenerate")
    p = np.concatenate([[p0_fixed], res.x * scale])
    return AllocationResult(p, "optimal", float(p[1:].sum()), res.slacks, res.gap, res.iterations)


def _p0_free(rows: list[QosRow]) -> bool:
    return all(row.rho[0] == 0.0 for row in rows)


def algorithm1_rows(rows: list[QosRow], p_max_mw: float, step_mw: float) -> AllocationResult:
    """Walk p_0 down from P_max in fixed steps until the total fits the budget.

    Each step solves the minimum-power problem for p_1..p_K at the current
    p_0.  An infeasible inner problem counts as an unbounded total.  The
    returned ``iterations`` is the number of steps taken.
    """
    if step_mw <= 0:
        raise ValueError("step must be positive")
    n = len(rows) + 1
    n_steps = int(math.floor(p_max_mw / step_mw * (1 + 1e-12)))
    cached = None
    free = _p0_free(rows)
    for j in range(1, n_steps + 1):
        p0 = max(0.0, p_max_mw - j * step_mw)
        if free and cached is not None:
            inner = cached
        else:
            inner = solve_pa(rows, p0)
            cached = inner
        if not inner.ok:
            continue
        total = p0 + float(inner.p[1:].sum())
        if total <= p_max_mw * (1 + 1e-12):
            p = inner.p.copy()
            p[0] = p0
            budget_slack = 1.0 - p.sum() / p_max_mw
            return AllocationResult(p, "optimal", float(p.sum()), np.append(inner.slacks, budget_slack),
                                    inner.gap, j)
    return _infeasible(n, n_steps)


def algorithm1(channels: ChannelSet, precoders: PrecoderSet, config: ScenarioConfig) -> AllocationResult:
    rows = build_qos_rows(channels.H, precoders, config.gamma_db, config.sigma_nc2)
    return algorithm1_rows(rows, config.p_max_mw, config.delta_p_mw)


# limited-backhaul evaluation --------------------------------------------------

def limited_outcome(channels: ChannelSet, precoders: PrecoderSet, config: ScenarioConfig, nodes=None):
    """Per-node rho and P_D and the voting outcome among ``nodes`` (default all)."""
    rhos = local_rhos(channels, precoders, config.L, config.sigma_rcs2, config.sigma_ns2)
    idx = np.arange(channels.R + 1) if nodes is None else np.asarray(nodes)
    pds = np.asarray(pd_from_rho(rhos[idx], config.pfa), dtype=float).reshape(-1)
    return rhos, pds, vote_outcome(pds, config.pfa)


def _limited_metric(channels, w_tilde, p, config, metric: str) -> float:
    _, pds, out = limited_outcome(channels, PrecoderSet(w_tilde, p), config)
    if metric == "fused":
        return out.fused_pd
    if metric == "pd_hat":
        return out.pd_hat
    raise ValueError(f"unknown metric {metric!r}")


def grid_upper_bound(channels: ChannelSet, precoders: PrecoderSet, config: ScenarioConfig,
                     grid_points: int, metric: str = "fused") -> tuple[float, float]:
    """Best limited-regime detection over a uniform p_0 grid on [0, P_max].

    Each grid point solves the minimum-power problem for the communication
    streams and is kept only if the total fits the budget.  Returns
    (p0*, metric*) or (nan, nan) when no grid point is feasible.
    """
    if grid_points < 2:
        raise ValueError("grid needs at least two points")
    rows = build_qos_rows(channels.H, precoders, config.gamma_db, config.sigma_nc2)
    pmax = config.p_max_mw
    best = (math.nan, -math.inf)
    for p0 in np.linspace(0.0, pmax, grid_points):
        inner = solve_pa(rows, float(p0))
        if not inner.ok or inner.p.sum() > pmax * (1 + 1e-12):
            continue
        val = _limited_metric(channels, precoders.w_tilde, inner.p, config, metric)
        if val > best[1]:
            best = (float(p0), val)
    if best[1] == -math.inf:
        return math.nan, math.nan
    return best


@dataclass(frozen=True)
class StepRecord:
    step_frac: float
    runtime_s: float
    iterations: float
    total_noncentrality_db: float
    feasible: int


def stepsize_tradeoff(config: ScenarioConfig, steps, trials: int | None = None) -> list[StepRecord]:
    """Runtime and 10 log10(sum_r rho_r) of the heuristic for each step fraction.

    Averages over the first ``trials`` channel draws of the configured seed;
    runtime is the mean wall time per draw.
    """
    trials = config.trials if trials is None else trials
    draws = []
    for t in range(trials):
        streams = TrialStreams(config.seed, t)
        ch = draw_channels(generate_layout(config, streams), config, streams)
        draws.append((ch, build_precoders(ch, config)))
    out = []
    for step in steps:
        cfg = config.replace(delta_p_frac=float(step))
        times, iters, totals = [], [], []
        for ch, prec in draws:
            t0 = time.perf_counter()
            res = algorithm1(ch, prec, cfg)
            times.append(time.perf_counter() - t0)
            iters.append(res.iterations)
            if res.ok:
                rhos = local_rhos(ch, prec.with_power(res.p), cfg.L, cfg.sigma_rcs2, cfg.sigma_ns2)
                totals.append(float(rhos.sum()))
        mean_total = float(np.mean(totals)) if totals else math.nan
        out.append(StepRecord(float(step), float(np.mean(times)), float(np.mean(iters)),
                              10.0 * math.log10(mean_total) if totals and mean_total > 0 else math.nan,
                              len(totals)))
    return out
