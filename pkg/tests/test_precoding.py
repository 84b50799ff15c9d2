import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iaps.config import ScenarioConfig
from iaps.precoding import (
    DegenerateGeometryError,
    PrecoderSet,
    beam_gain,
    build_precoders,
    coupling,
    rzf,
    sinr,
    sinr_all,
    zfr,
)
from iaps.scenario import TrialStreams, draw_channels, generate_layout, steering


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _same_direction(u, v):
    return abs(abs(np.vdot(u, v)) - np.linalg.norm(u) * np.linalg.norm(v)) < 1e-10


def test_rzf_single_user_is_matched():
    h = _cn(np.random.default_rng(0), 6, 1)
    w = rzf(h, 0.3)
    assert _same_direction(w[:, 0], h[:, 0])


def test_rzf_orthogonal_channels_zero_forcing():
    H = np.eye(5)[:, :3] * np.array([1.0, 2.0, 0.5])
    W = rzf(H, 0.0)
    cross = np.abs(H.conj().T @ W)
    np.fill_diagonal(cross, 0)
    assert cross.max() < 1e-14


def test_rzf_matches_dense_solve():
    rng = np.random.default_rng(1)
    H = _cn(rng, 4, 2)
    V = np.linalg.solve(H @ H.conj().T + np.eye(4), H)
    W = rzf(H, 1.0)
    for k in range(2):
        v = V[:, k] / np.linalg.norm(V[:, k])
        assert _same_direction(W[:, k], v)
        np.testing.assert_allclose(np.abs(W[:, k]), np.abs(v), atol=1e-10)


def test_rzf_rank_deficient_at_zero():
    h = _cn(np.random.default_rng(2), 4, 1)
    with pytest.raises(np.linalg.LinAlgError):
        rzf(np.hstack([h, h]), 0.0)


def _gram_schmidt_null(H, a):
    basis = []
    for col in H.T:
        v = col.astype(complex)
        for b in basis:
            v = v - np.vdot(b, v) * b
        basis.append(v / np.linalg.norm(v))
    w = a.astype(complex)
    for b in basis:
        w = w - np.vdot(b, w) * b
    return w / np.linalg.norm(w)


def test_zfr_examples():
    a = steering(0.4, 4)
    w = zfr(np.zeros((4, 2)), a)
    assert _same_direction(w, a)
    rng = np.random.default_rng(3)
    H = _cn(rng, 4, 2)
    w = zfr(H, a)
    assert np.max(np.abs(H.conj().T @ w)) <= 1e-10
    ref = _gram_schmidt_null(H, a)
    assert _same_direction(w, ref)
    np.testing.assert_allclose(np.abs(w), np.abs(ref), atol=1e-10)


def test_zfr_degenerate_and_modes():
    a = steering(0.4, 3)
    with pytest.raises(DegenerateGeometryError):
        zfr(np.column_stack([a, steering(0.9, 3)]), a)
    with pytest.raises(ValueError):
        zfr(np.zeros((3, 3)), a)
    with pytest.raises(ValueError):
        zfr(np.zeros((3, 1)), a, mode="bogus")
    rng = np.random.default_rng(4)
    H = 0.1 * _cn(rng, 4, 2)
    w = zfr(H, steering(0.2, 4), mode="paper-literal")
    v = np.linalg.solve(np.eye(4) - H @ H.conj().T, steering(0.2, 4))
    assert _same_direction(w, v)


def test_phase_convention():
    rng = np.random.default_rng(5)
    H = _cn(rng, 6, 3)
    W = rzf(H, 0.5)
    assert np.all(np.abs(W[0].imag) < 1e-15) and np.all(W[0].real >= 0)


def test_precoder_set_invariants():
    rng = np.random.default_rng(6)
    H = _cn(rng, 8, 3)
    wt = np.column_stack([zfr(H, steering(0.3, 8)), rzf(H, 0.1)])
    p = rng.uniform(0, 5, 4)
    prec = PrecoderSet(wt, p)
    np.testing.assert_allclose(np.linalg.norm(prec.w_tilde, axis=0), 1.0, atol=1e-12)
    Wh = prec.W_hat
    np.testing.assert_allclose(Wh, Wh.conj().T)
    assert np.linalg.eigvalsh(Wh).min() > -1e-12
    assert np.trace(Wh).real == pytest.approx(p.sum(), rel=1e-9)
    with pytest.raises(ValueError):
        PrecoderSet(wt, -p)
    with pytest.raises(ValueError):
        PrecoderSet(wt, p[:2])


def test_sinr_examples():
    rng = np.random.default_rng(7)
    h = _cn(rng, 4, 1)
    wt = np.column_stack([zfr(h, steering(0.5, 4)), rzf(h, 1e-9)])
    prec = PrecoderSet(wt, np.array([0.0, 2.0]))
    assert sinr(h, prec, 1, 0.1) == pytest.approx(2.0 * np.linalg.norm(h) ** 2 / 0.1, rel=1e-9)
    assert sinr(h, prec.with_power([0.0, 0.0]), 1, 0.1) == 0.0
    with pytest.raises(IndexError):
        sinr(h, prec, 2, 0.1)


def test_sinr_matches_term_by_term():
    rng = np.random.default_rng(8)
    H = _cn(rng, 6, 3)
    wt = np.column_stack([_cn(rng, 6), _cn(rng, 6), _cn(rng, 6), _cn(rng, 6)])
    wt /= np.linalg.norm(wt, axis=0)
    p = rng.uniform(0.1, 2, 4)
    prec = PrecoderSet(wt, p)
    for k in range(1, 4):
        h = H[:, k - 1]
        sig = p[k] * abs(np.vdot(h, wt[:, k])) ** 2
        inter = sum(p[j] * abs(np.vdot(h, wt[:, j])) ** 2 for j in range(4) if j != k)
        assert sinr(H, prec, k, 0.3) == pytest.approx(sig / (inter + 0.3), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 10.0), st.floats(1.0, 4.0))
def test_sinr_properties(seed, p0, boost):
    cfg = ScenarioConfig()
    s = TrialStreams(seed, 0)
    ch = draw_channels(generate_layout(cfg, s), cfg, s)
    prec = build_precoders(ch, cfg)
    p = np.full(cfg.K + 1, 1.0)
    base = sinr_all(ch.H, prec.with_power(p), cfg.sigma_nc2)
    p[0] = p0
    np.testing.assert_allclose(sinr_all(ch.H, prec.with_power(p), cfg.sigma_nc2), base, rtol=1e-9)
    assert np.all(base >= 0)
    p[1] *= boost
    assert sinr(ch.H, prec.with_power(p), 1, cfg.sigma_nc2) >= base[0]


def test_rank_one_trace_identity():
    cfg = ScenarioConfig(R=3)
    s = TrialStreams(11, 0)
    ch = draw_channels(generate_layout(cfg, s), cfg, s)
    prec = build_precoders(ch, cfg).with_power(np.linspace(1, 2, cfg.K + 1))
    awa = np.vdot(ch.a_theta, prec.W_hat @ ch.a_theta).real
    for r in range(cfg.R + 1):
        B = ch.response(r)
        n = B.shape[0]
        assert np.trace(B @ prec.W_hat @ B.conj().T).real == pytest.approx(n * awa, rel=1e-10)


def test_beam_gain_examples():
    a = steering(0.3, 8)
    prec = PrecoderSet(np.column_stack([a / np.sqrt(8), np.eye(8)[:, 0]]))
    assert beam_gain(prec, a)[0] == pytest.approx(8.0)
    v = np.zeros(8, complex)
    v[0], v[1] = a[0], -a[1]
    v /= np.linalg.norm(v)
    assert beam_gain(PrecoderSet(v[:, None]), a)[0] == pytest.approx(0.0, abs=1e-15)


def _sensing_wins(cfg, draws=1000):
    wins = 0
    for t in range(draws):
        s = TrialStreams(21, t)
        ch = draw_channels(generate_layout(cfg, s), cfg, s)
        c = beam_gain(build_precoders(ch, cfg), ch.a_theta)
        wins += c[0] == c.max()
    return wins


def test_sensing_beam_dominates_literal_precoder():
    assert _sensing_wins(ScenarioConfig(zfr_mode="paper-literal")) >= 990


def test_sensing_beam_dominates_projection_precoder():
    # exact nulling removes K of M dimensions from a(theta); measured rate ~97.6%
    assert _sensing_wins(ScenarioConfig()) >= 965


def test_coupling_shape():
    cfg = ScenarioConfig(K=3)
    s = TrialStreams(0, 0)
    ch = draw_channels(generate_layout(cfg, s), cfg, s)
    assert coupling(ch.H, build_precoders(ch, cfg)).shape == (3, 4)
