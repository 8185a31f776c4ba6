import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from fracheat.core import (CheckRecord, SpaceGrid, SpaceTimeField, TimeGrid, default_half_width,
                           l2_norm, l2_norms, quad_weights)


def test_time_grid_nodes():
    g = TimeGrid(2.0, 4)
    assert g.nodes.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert g.dt == 0.5
    assert g.index_of(1.5) == 3
    with pytest.raises(ValueError):
        g.index_of(0.7)


@pytest.mark.parametrize("T,N", [(0.0, 3), (-1.0, 3), (1.0, 0), (1.0, 2.5)])
def test_time_grid_rejects(T, N):
    with pytest.raises(ValueError):
        TimeGrid(T, N)


def test_space_grid_contains_zero_and_is_symmetric():
    g = SpaceGrid(3.0, 7)
    assert g.nodes[g.zero_index] == 0.0
    np.testing.assert_array_equal(g.nodes, -g.nodes[::-1])
    assert g.nodes[0] == -3.0 and g.nodes[-1] == 3.0


@pytest.mark.parametrize("M", [1, 4])
def test_space_grid_rejects(M):
    with pytest.raises(ValueError):
        SpaceGrid(1.0, M)


def test_quad_weights_examples():
    np.testing.assert_array_equal(quad_weights(SpaceGrid(1.0, 3)), [0.5, 1.0, 0.5])
    np.testing.assert_array_equal(quad_weights(SpaceGrid(2.0, 5)), [0.5, 1, 1, 1, 0.5])
    g = SpaceGrid(1.0, 101)
    assert abs(quad_weights(g) @ np.ones(101) - 2.0) < 1e-14


def test_l2_norm_examples():
    g = SpaceGrid(1.0, 3)
    assert l2_norm(np.zeros(3), g) == 0.0
    assert l2_norm(np.ones(3), g) == pytest.approx(math.sqrt(2), abs=1e-15)
    with pytest.raises(ValueError):
        l2_norm(np.ones(4), g)


def test_l2_norm_matches_adaptive_quadrature():
    g = SpaceGrid(8.0, 4001)
    ref = math.sqrt(quad(lambda x: math.exp(-2 * x * x), -8, 8, epsabs=1e-14)[0])
    assert abs(l2_norm(np.exp(-g.nodes ** 2), g) - ref) < 1e-6


def test_l2_norm_refinement_is_second_order():
    f = lambda x: np.exp(-x ** 2) * (1 + x)  # noqa: E731
    exact = math.sqrt(quad(lambda x: (math.exp(-x * x) * (1 + x)) ** 2, -2, 2)[0])
    errs = [abs(l2_norm(f(g.nodes), g) - exact) for g in (SpaceGrid(2.0, 41), SpaceGrid(2.0, 81))]
    assert 3.0 < errs[0] / errs[1] < 5.0


@given(st.floats(0.1, 10), st.integers(1, 40))
def test_quad_weights_positive_symmetric(L, half):
    w = quad_weights(SpaceGrid(L, 2 * half + 1))
    assert np.all(w > 0)
    np.testing.assert_array_equal(w, w[::-1])
    assert w[0] == pytest.approx(0.5 * w[1])
    assert w.sum() == pytest.approx(2 * L, rel=1e-12)


@given(st.floats(-1e3, 1e3), st.integers(0, 2 ** 31))
def test_l2_norm_homogeneous(c, seed):
    g = SpaceGrid(2.0, 21)
    v = np.random.default_rng(seed).normal(size=21)
    assert l2_norm(c * v, g) == pytest.approx(abs(c) * l2_norm(v, g), rel=1e-13, abs=1e-300)


def test_l2_norms_rowwise():
    g = SpaceGrid(1.0, 5)
    rows = np.arange(15.0).reshape(3, 5)
    np.testing.assert_allclose(l2_norms(rows, g), [l2_norm(r, g) for r in rows], rtol=1e-15)


def test_default_half_width():
    L = default_half_width(1.0, 4.0)
    assert math.exp(-L ** 2 / (2 * 4.0)) == pytest.approx(1e-12, rel=1e-9)


def test_field_validation_and_arithmetic():
    tg, xg = TimeGrid(1.0, 2), SpaceGrid(1.0, 3)
    with pytest.raises(ValueError):
        SpaceTimeField(np.zeros((2, 3)), tg, xg)
    with pytest.raises(ValueError):
        SpaceTimeField(np.full((3, 3), np.nan), tg, xg)
    u = SpaceTimeField.from_function(lambda t, x: t + x, tg, xg)
    v = SpaceTimeField.zeros(tg, xg)
    np.testing.assert_array_equal((u - v).values, u.values)
    np.testing.assert_array_equal((u + u).values, u.scaled(2.0).values)
    assert u.same_grids(v)
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0


def test_check_record_serialisation():
    assert CheckRecord("a", 3, 0.5, True).to_dict() == {
        "name": "a", "probe_count": 3, "sup_ratio": 0.5, "passed": True, "reason": None}
    r = CheckRecord.rejected("b", "bad window").to_dict()
    assert r["reason"] == "bad window" and r["sup_ratio"] is None and not r["passed"]
