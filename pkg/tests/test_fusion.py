import math

import numpy as np
import pytest

from iaps.config import ScenarioConfig
from iaps.fusion import (
    SingularModelError,
    StackedModel,
    analytic_pd_fusion,
    draw_symbols,
    estimate_alpha,
    fusion_threshold,
    glrt_statistic,
    monte_carlo_pd,
    noncentrality_fusion,
    simulate_observation,
    stack,
)
from iaps.precoding import build_precoders
from iaps.scenario import TrialStreams, draw_channels, generate_layout

SMALL = ScenarioConfig(M=4, N0=5, N1=3, K=2, R=2, L=6)


def _setup(cfg=SMALL, seed=3, powers=(0.5, 0.25, 0.25)):
    s = TrialStreams(seed, 0)
    ch = draw_channels(generate_layout(cfg, s), cfg, s)
    prec = build_precoders(ch, cfg).with_power(np.array(powers))
    S = draw_symbols(cfg.K + 1, cfg.L, np.random.default_rng(seed))
    return ch, prec, S


def test_symbols_exactly_white():
    S = draw_symbols(3, 30, np.random.default_rng(0))
    np.testing.assert_allclose(S @ S.conj().T, 30 * np.eye(3), atol=1e-12)
    with pytest.raises(ValueError):
        draw_symbols(5, 4, np.random.default_rng(0))


def test_noise_free_observation_model():
    ch, prec, S = _setup()
    alpha = np.array([1 + 1j, -0.5, 0.2j])
    zero = simulate_observation(ch, prec, None, S, 0.0, np.random.default_rng(0))
    assert all(np.all(z == 0) for z in zero)
    obs = simulate_observation(ch, prec, alpha, S, 0.0, np.random.default_rng(0))
    X = prec.W @ S
    for r in range(3):
        np.testing.assert_allclose(obs[r], alpha[r] * ch.response(r) @ X, atol=1e-15)
    with pytest.raises(ValueError):
        simulate_observation(ch, prec, alpha[:2], S, 0.0, np.random.default_rng(0))


def test_noise_covariance():
    ch, prec, S = _setup()
    rng = np.random.default_rng(1)
    samples = np.concatenate([stack(simulate_observation(ch, prec, None, S, 2.0, rng)) for _ in range(2000)])
    cov = samples.T @ samples.conj() / samples.shape[0]
    np.testing.assert_allclose(np.diag(cov).real, 2.0, rtol=0.05)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 0.1


def test_stacked_model_blocks():
    ch, prec, S = _setup()
    model = StackedModel.build(ch, prec, S)
    A = model.A()
    assert A.shape == (6, 5 + 2 * 3, 3)
    assert all(np.linalg.matrix_rank(B) == 1 for B in model.responses)
    assert np.all(A[:, :5, 1:] == 0) and np.all(A[:, 5:8, [0, 2]] == 0)


def test_estimate_alpha_noise_free_and_scalar():
    ch, prec, S = _setup()
    alpha = np.array([1 + 1j, -0.5, 0.2j])
    A = StackedModel.build(ch, prec, S).A()
    z = stack(simulate_observation(ch, prec, alpha, S, 0.0, np.random.default_rng(0)))
    np.testing.assert_allclose(estimate_alpha(z, A), alpha, atol=1e-10)

    cfg0 = SMALL.replace(R=0)
    ch0, prec0, S0 = _setup(cfg0)
    A0 = StackedModel.build(ch0, prec0, S0).A()
    z0 = stack(simulate_observation(ch0, prec0, None, S0, 1.0, np.random.default_rng(2)))
    a = A0[:, :, 0]
    ratio = np.sum(a.conj() * z0) / np.sum(np.abs(a) ** 2)
    assert estimate_alpha(z0, A0)[0] == pytest.approx(ratio, rel=1e-12)


def test_estimate_alpha_unbiased_under_h0():
    ch, prec, S = _setup()
    A = StackedModel.build(ch, prec, S).A()
    rng = np.random.default_rng(3)
    z = np.stack([stack(simulate_observation(ch, prec, None, S, 1.0, rng)) for _ in range(10000)])
    est = estimate_alpha(z, A)
    se = est.std(axis=0) / math.sqrt(len(est))
    assert np.all(np.abs(est.mean(axis=0).real) <= 3 * se)
    assert np.all(np.abs(est.mean(axis=0).imag) <= 3 * se)


def test_singular_model():
    ch, prec, S = _setup(powers=(0.0, 0.0, 0.0))
    A = StackedModel.build(ch, prec, S).A()
    with pytest.raises(SingularModelError):
        estimate_alpha(np.zeros(A.shape[:2]), A)


def test_statistic_identities():
    ch, prec, S = _setup()
    A = StackedModel.build(ch, prec, S).A()
    assert glrt_statistic(np.zeros(A.shape[:2]), A, 1.0) == 0.0
    alpha = np.array([0.3, 1j, -0.7])
    z = stack(simulate_observation(ch, prec, alpha, S, 0.0, np.random.default_rng(0)))
    plug_in = 2.0 / 0.5 * sum(np.linalg.norm(A[l] @ alpha) ** 2 for l in range(SMALL.L))
    assert glrt_statistic(z, A, 0.5) == pytest.approx(plug_in, rel=1e-10)


def test_null_mean_matches_exact_dof():
    ch, prec, S = _setup()
    A = StackedModel.build(ch, prec, S).A()
    rng = np.random.default_rng(4)
    z = np.stack([stack(simulate_observation(ch, prec, None, S, 1.0, rng)) for _ in range(10000)])
    stat = glrt_statistic(z, A, 1.0)
    dof = 2 * (SMALL.R + 1)
    assert abs(stat.mean() - dof) <= 3 * math.sqrt(2 * dof / len(stat))


def test_false_alarm_at_one_percent():
    ch, prec, S = _setup()
    A = StackedModel.build(ch, prec, S).A()
    rng = np.random.default_rng(5)
    z = np.stack([stack(simulate_observation(ch, prec, None, S, 1.0, rng)) for _ in range(20000)])
    rate = np.mean(glrt_statistic(z, A, 1.0) >= fusion_threshold(0.01, SMALL.R + 1))
    assert abs(rate - 0.01) <= 3 * math.sqrt(0.01 * 0.99 / 20000)
    assert fusion_threshold(0.01, 3) == pytest.approx(16.811893829770927, rel=1e-12)


def test_noncentrality_properties():
    ch, prec, S = _setup()
    B = [ch.response(r) for r in range(3)]
    rho = noncentrality_fusion(prec, B, 6, 0.1, 2.0)
    assert noncentrality_fusion(prec.with_power(np.zeros(3)), B, 6, 0.1, 2.0) == 0.0
    assert noncentrality_fusion(prec.with_power(2 * prec.p), B, 6, 0.1, 2.0) == pytest.approx(2 * rho)
    awa = np.vdot(ch.a_theta, prec.W_hat @ ch.a_theta).real
    assert rho == pytest.approx(2 * 6 * 0.1 / 2.0 * (5 + 2 * 3) * awa, rel=1e-10)
    active = noncentrality_fusion(prec, B, 6, 0.1, 2.0, nodes=[0])
    passive = noncentrality_fusion(prec, B, 6, 0.1, 2.0, nodes=[1, 2])
    assert active + passive == pytest.approx(rho, rel=1e-14)
    assert analytic_pd_fusion(0.0, 1e-5) == pytest.approx(1e-5)


def _matched(cfg, rho):
    ch, prec, S = _setup(cfg)
    unit = noncentrality_fusion(prec, [ch.response(r) for r in range(cfg.R + 1)], cfg.L, 1.0, 1.0)
    return ch, prec, S, rho / unit


@pytest.mark.parametrize("rho", [5.0, 15.0, 25.0])
def test_fixed_amplitude_single_node_follows_marcum(rho):
    cfg = SMALL.replace(R=0)
    ch, prec, S, var = _matched(cfg, rho)
    pd, _ = monte_carlo_pd(ch, prec, S, var, 1.0, 1e-5, 10000, np.random.default_rng(6), amplitude="fixed")
    assert abs(pd - analytic_pd_fusion(rho, 1e-5)) <= 0.02


@pytest.mark.parametrize("rho", [5.0, 15.0, 25.0])
def test_fluctuating_single_node_follows_exponential_law(rho):
    cfg = SMALL.replace(R=0)
    ch, prec, S, var = _matched(cfg, rho)
    pd, _ = monte_carlo_pd(ch, prec, S, var, 1.0, 1e-5, 10000, np.random.default_rng(7))
    # with alpha ~ CN the statistic is exponential: P_D = pfa^(1/(1 + rho/2))
    assert abs(pd - 1e-5 ** (1 / (1 + rho / 2))) <= 0.02


def test_scenario_scale_detection_at_high_gain():
    cfg = ScenarioConfig(sigma_rcs_db=-16.0)
    from iaps.optimize import build_qos_rows, objective_gains, solve_p2

    pds = []
    for t in range(20):
        s = TrialStreams(cfg.seed, t)
        ch = draw_channels(generate_layout(cfg, s), cfg, s)
        prec = build_precoders(ch, cfg)
        res = solve_p2(build_qos_rows(ch.H, prec, cfg.gamma_db, cfg.sigma_nc2), objective_gains(ch, prec),
                       cfg.p_max_mw)
        if res.ok:
            rho = noncentrality_fusion(prec.with_power(res.p), [ch.response(r) for r in range(cfg.R + 1)],
                                       cfg.L, cfg.sigma_rcs2, cfg.sigma_ns2)
            pds.append(analytic_pd_fusion(rho, cfg.pfa))
    assert np.mean(pds) >= 0.99
