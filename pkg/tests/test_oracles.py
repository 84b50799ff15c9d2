import math

import numpy as np
import pytest

from iaps.oracles import (
    enumerate_best_kappa,
    enumerate_error,
    grid_lp,
    lp_table,
    quad_sf,
    simplex_grid_max,
    vote_grid,
    write_all,
)


def test_quadrature_against_closed_forms():
    # central case: exp(-xi / 2)
    for xi in (0.5, 5.0, 23.0):
        assert quad_sf(xi, 0.0) == pytest.approx(math.exp(-xi / 2), rel=1e-10)
    assert quad_sf(0.0, 7.0) == pytest.approx(1.0, abs=1e-12)


def test_enumeration_small_cases():
    # one voter: kappa = 1 gives (1 - pd + pfa) / 2
    assert enumerate_error(1, 0.8, 0.1, 1) == pytest.approx(0.15)
    assert enumerate_best_kappa(0.9, 0.1, 3)[0] == 2


def test_grid_lp_on_known_problem():
    x, v = grid_lp([3, 2], [[1, 1], [1, 3], [1, 0]], [4, 6, 3], [0, 0], [4, 4])
    assert v == pytest.approx(11.0, abs=1e-6)
    np.testing.assert_allclose(x, [3, 1], atol=1e-6)
    assert grid_lp([1, 1], [[1, 1]], [-1.0], [0, 0], [1, 1])[0] is None


def test_simplex_grid_search():
    x, v = simplex_grid_max([2.0, 1.0], [[-1.0, 0.0]], [-0.25], 1.0, 1e-3)
    assert v == pytest.approx(2.0, abs=1e-9)
    assert simplex_grid_max([1.0, 1.0], [[1.0, 1.0]], [-1.0], 1.0, 0.1)[0] is None


def test_vote_grid_shape():
    grid = vote_grid()
    assert len(grid) == 20 and all(pd > pfa for pd, pfa in grid)


def test_lp_table_frozen():
    expected = [1.7397795377759542, 1.741913945194516, 1.6151626308345035, 1.720280108541186,
                1.616227534378729]
    rows = lp_table()
    assert [r[1] for r in rows] == [1, 2, 3, 1, 2]
    np.testing.assert_allclose([r[2] for r in rows], expected, rtol=0, atol=1e-12)


@pytest.mark.slow
def test_tables_are_reproducible(tmp_path):
    a = write_all(tmp_path / "a")
    b = write_all(tmp_path / "b")
    assert a == b
    sums = (tmp_path / "a" / "SHA256SUMS").read_text().splitlines()
    assert len(sums) == 3
