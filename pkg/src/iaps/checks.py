"""Built-in property suite run by ``iaps selftest``.

Each check is quick (well under a minute in total) and returns a
:class:`CheckResult`; the suite never raises on a failed property.
"""

from __future__ import annotations

import math
import traceback
from dataclasses import dataclass
from typing import Callable

import numpy as np

from iaps.config import ScenarioConfig
from iaps.fusion import StackedModel, draw_symbols, fusion_threshold, glrt_statistic, simulate_observation, stack
from iaps.local import interference_cov, local_glrt, matched_filter, whitener
from iaps.optimize.lp import simplex
from iaps.optimize.power import build_qos_rows, objective_gains, replay_sinr, solve_p2, solve_pa
from iaps.oracles import enumerate_best_kappa, enumerate_error, quad_sf, vote_grid
from iaps.precoding import PrecoderSet, build_precoders, sinr_all
from iaps.scenario import TrialStreams, draw_channels, generate_layout
from iaps.stats import noncentral_chi2_sf_2dof, threshold_from_pfa
from iaps.vote import beta, error_prob, optimal_kappa


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _kernel() -> str:
    grid = np.linspace(0.0, 50.0, 11)
    err = max(abs(noncentral_chi2_sf_2dof(x, r) - quad_sf(x, r)) for x in grid for r in grid)
    assert err <= 1e-9, f"max error {err:.2e}"
    assert abs(threshold_from_pfa(1e-5) - 23.025850929940457) < 1e-10
    return f"max |series - quadrature| = {err:.1e}"


def _voting() -> str:
    worst = 0.0
    for n in (3, 5, 11):
        for pd, pfa in vote_grid():
            for k in range(1, n + 1):
                worst = max(worst, abs(error_prob(k, pd, pfa, n) - enumerate_error(k, pd, pfa, n)))
            kb, eb = enumerate_best_kappa(pd, pfa, n)
            ko = optimal_kappa(pd, pfa, n)
            assert abs(enumerate_error(ko, pd, pfa, n) - eb) <= 1e-12, (n, pd, pfa, kb, ko)
    assert worst <= 1e-12, f"max error {worst:.2e}"
    assert abs(error_prob(2, 0.9, 0.1, 3) - 0.028) <= 1e-15
    return f"max |formula - enumeration| = {worst:.1e}"


def _lemmas() -> str:
    for pfa in (1e-5, 1e-3, 1e-2, 0.05):
        pds = np.linspace(pfa, 1.0, 502)[1:-1]
        b = np.array([beta(p, pfa) for p in pds])
        assert np.all(np.diff(b) < 0), f"beta not decreasing at pfa={pfa}"
        for n in (3, 11):
            u = np.array([error_prob(optimal_kappa(p, pfa, n), p, pfa, n) for p in pds])
            assert np.all(np.diff(u) <= 1e-12), f"error not nonincreasing at pfa={pfa}, n={n}"
    return "beta decreasing; optimal error nonincreasing"


def _scenario(trials: int = 20):
    cfg = ScenarioConfig()
    for t in range(trials):
        s = TrialStreams(cfg.seed, t)
        ch = draw_channels(generate_layout(cfg, s), cfg, s)
        yield cfg, ch, build_precoders(ch, cfg)


def _precoders() -> str:
    for cfg, ch, prec in _scenario():
        assert np.allclose(np.linalg.norm(prec.w_tilde, axis=0), 1.0, atol=1e-12)
        assert np.max(np.abs(ch.H.conj().T @ prec.w_tilde[:, 0])) <= 1e-10 * np.linalg.norm(ch.H)
        p = np.full(cfg.K + 1, cfg.p_max_mw / (cfg.K + 1))
        g1 = sinr_all(ch.H, prec.with_power(p), cfg.sigma_nc2)
        p[0] *= 3.0
        g2 = sinr_all(ch.H, prec.with_power(p), cfg.sigma_nc2)
        assert np.allclose(g1, g2, rtol=1e-9)
    return "unit norms, exact nulling, SINR independent of p0"


def _optimizer() -> str:
    n_opt = 0
    for cfg, ch, prec in _scenario(40):
        rows = build_qos_rows(ch.H, prec, cfg.gamma_db, cfg.sigma_nc2)
        res = solve_p2(rows, objective_gains(ch, prec), cfg.p_max_mw)
        if not res.ok:
            continue
        n_opt += 1
        assert res.gap <= 1e-6, f"gap {res.gap}"
        assert res.p.sum() <= cfg.p_max_mw * (1 + 1e-9)
        assert replay_sinr(rows, res.p).min() >= cfg.gamma * (1 - 1e-6)
        pa = solve_pa(rows, 0.0)
        assert pa.ok and replay_sinr(rows, pa.p).min() >= cfg.gamma * (1 - 1e-6)
    rng = np.random.default_rng(5)
    for _ in range(200):
        A = rng.normal(size=(4, 3))
        b = rng.uniform(0.1, 2.0, 4)
        res = simplex(rng.normal(size=3), np.vstack([A, np.ones(3)]), np.append(b, 5.0))
        assert res.status == "optimal" and res.gap <= 1e-9
    return f"{n_opt} feasible allocations certified"


def _calibration(trials: int = 20000) -> str:
    rng = np.random.default_rng(99)
    cfg = ScenarioConfig(M=4, N0=5, N1=3, K=2, R=2, L=6)
    s = TrialStreams(7, 0)
    ch = draw_channels(generate_layout(cfg, s), cfg, s)
    prec = build_precoders(ch, cfg).with_power(np.array([0.5, 0.3, 0.2]) * cfg.p_max_mw)
    S = draw_symbols(cfg.K + 1, cfg.L, rng)
    sigma2 = 1e-9
    pfa = 0.01
    A = StackedModel.build(ch, prec, S).A()
    z = np.stack([stack(simulate_observation(ch, prec, None, S, sigma2, rng)) for _ in range(trials)])
    rate = float(np.mean(glrt_statistic(z, A, sigma2) >= fusion_threshold(pfa, cfg.R + 1)))
    se = math.sqrt(pfa * (1 - pfa) / trials)
    assert abs(rate - pfa) <= 4 * se, f"fusion false-alarm rate {rate}"
    Q = interference_cov(None, prec.W_hat, sigma2, cfg.N0)
    noise = math.sqrt(sigma2 / 2) * (rng.standard_normal((trials, cfg.N0, cfg.L))
                                     + 1j * rng.standard_normal((trials, cfg.N0, cfg.L)))
    stat = local_glrt(matched_filter(noise, S), prec, ch.response(0), Q)
    rate0 = float(np.mean(stat >= threshold_from_pfa(pfa)))
    assert abs(rate0 - pfa) <= 4 * se, f"local false-alarm rate {rate0}"
    U = whitener(Q)
    assert np.allclose(U.conj().T @ Q @ U, np.eye(cfg.N0), atol=1e-10)
    return f"fusion {rate:.4f}, local {rate0:.4f} at pfa {pfa}"


CHECKS: dict[str, Callable[[], str]] = {
    "chi-square kernel vs quadrature": _kernel,
    "voting vs enumeration": _voting,
    "beta and error monotonicity": _lemmas,
    "precoder invariants": _precoders,
    "allocation certificates": _optimizer,
    "false-alarm calibration": _calibration,
}


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        try:
            out.append(CheckResult(name, True, fn()))
        except AssertionError as exc:
            out.append(CheckResult(name, False, str(exc) or "assertion failed"))
        except Exception:  # a crashing check is a failed check
            out.append(CheckResult(name, False, traceback.format_exc(limit=2).strip().splitlines()[-1]))
    return out
