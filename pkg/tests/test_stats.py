import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from iaps.oracles import quad_sf
from iaps.stats import (
    chi2_cdf_2dof,
    detection_curve,
    empirical_pfa_pd,
    noncentral_chi2_sf_2dof,
    pd_from_rho,
    threshold_from_pfa,
)

XI_5 = -2 * math.log(1e-5)


def test_threshold_closed_forms():
    assert threshold_from_pfa(1e-5) == pytest.approx(23.025850929940457, abs=1e-12)
    assert threshold_from_pfa(0.5) == pytest.approx(2 * math.log(2), abs=1e-15)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            threshold_from_pfa(bad)


@given(st.floats(1e-12, 1 - 1e-9))
def test_threshold_inverts_cdf(q):
    assert chi2_cdf_2dof(threshold_from_pfa(q)) == pytest.approx(1 - q, abs=1e-14)


def test_sf_edge_cases():
    assert noncentral_chi2_sf_2dof(XI_5, 0.0) == pytest.approx(1e-5, rel=1e-12)
    assert noncentral_chi2_sf_2dof(0.0, 17.0) == 1.0
    with pytest.raises(ValueError):
        noncentral_chi2_sf_2dof(-1.0, 1.0)
    with pytest.raises(ValueError):
        noncentral_chi2_sf_2dof(1.0, -1.0)


# reference values from adaptive quadrature of the density
@pytest.mark.parametrize("xi, rho, expected", [
    (XI_5, 5.0, 0.007947945520563902),
    (XI_5, 15.0, 0.20933174694829035),
    (XI_5, 25.0, 0.6195404124652468),
    (10.0, 3.0, 0.1125232783031731),
    (40.0, 5.0, 3.747106421139183e-05),
])
def test_sf_reference_values(xi, rho, expected):
    assert noncentral_chi2_sf_2dof(xi, rho) == pytest.approx(expected, abs=1e-12)


def test_sf_matches_live_quadrature_on_coarse_grid():
    grid = np.linspace(0, 50, 8)
    for x in grid:
        for r in grid:
            assert abs(noncentral_chi2_sf_2dof(x, r) - quad_sf(x, r)) <= 1e-9


def test_sf_monotone_on_grid():
    grid = np.linspace(0, 50, 51)
    vals = noncentral_chi2_sf_2dof(grid[:, None], grid[None, :])
    assert np.all(np.diff(vals, axis=1) >= -1e-15)
    assert np.all(np.diff(vals, axis=0) <= 1e-15)


def test_sf_tiny_tail_and_large_rho():
    assert 0 < noncentral_chi2_sf_2dof(-2 * math.log(1e-12), 0.0) == pytest.approx(1e-12, rel=1e-10)
    assert noncentral_chi2_sf_2dof(XI_5, 2000.0) == 1.0


def test_detection_curve_invariants():
    c = detection_curve(np.linspace(0, 60, 61), 1e-3)
    assert c.pd[0] == pytest.approx(1e-3)
    assert np.all(np.diff(c.pd) > 0)
    assert np.all((c.pd >= 1e-3 - 1e-15) & (c.pd <= 1))
    assert pd_from_rho(25.0, 1e-5) == pytest.approx(0.6195404124652468, abs=1e-12)


def test_empirical_rates():
    r = empirical_pfa_pd([0.1, 0.2], [0.3], 1.0)
    assert (r.pfa_hat, r.pd_hat) == (0.0, 0.0)
    r = empirical_pfa_pd([0.0, 2.0], [1.0], 0.0)
    assert (r.pfa_hat, r.pd_hat) == (1.0, 1.0)
    with pytest.raises(ValueError):
        empirical_pfa_pd([], [1.0], 1.0)


def test_empirical_calibration():
    rng = np.random.default_rng(0)
    n = 100_000
    h0 = rng.chisquare(2, n)
    r = empirical_pfa_pd(h0, h0, threshold_from_pfa(0.01))
    assert abs(r.pfa_hat - 0.01) <= 3 * math.sqrt(0.01 * 0.99 / n)
    assert r.pfa_se == pytest.approx(math.sqrt(r.pfa_hat * (1 - r.pfa_hat) / n))
