import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracheat.core import SpaceGrid, TimeGrid, quad_weights
from fracheat.fraccalc import GridFunction, gls_integral
from fracheat.noise_field import (NoiseEnsemble, NoiseSpec, basis_eval, basis_matrix,
                                  component_seeds, field_sample, ineg_ratio, integrate_against_WH,
                                  read_bundle, write_bundle)

from conftest import small_config


def ensemble(J=3, H=0.75, L=2.0, N=16, seed=0):
    return NoiseEnsemble.sample(NoiseSpec(J, H, L), TimeGrid(1.0, N), seed)


def test_basis_examples():
    assert basis_eval(1, 0.0, 1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert basis_eval(3, 5.0, 1.0) == 0.0
    g = SpaceGrid(1.0, 201)
    w = quad_weights(g)
    assert abs(w @ (basis_eval(2, g.nodes, 1.0) * basis_eval(3, g.nodes, 1.0))) <= 1e-10
    x = np.linspace(-3, 3, 5001)
    for j in range(1, 65):
        assert np.max(np.abs(basis_eval(j, x, 3.0))) <= math.sqrt(2 / 3.0) * (1 + 1e-12)
    with pytest.raises(ValueError):
        basis_eval(0, 0.0, 1.0)


def test_basis_orthonormal_on_grid():
    g = SpaceGrid(2.5, 129)
    E = basis_matrix(20, g)
    gram = (E * quad_weights(g)) @ E.T
    np.testing.assert_allclose(gram, np.eye(20), atol=1e-10)


def test_spec_validation_and_weights():
    spec = NoiseSpec(4, 0.75, 1.0)
    np.testing.assert_allclose(spec.weights, [1, 1 / 4, 1 / 9, 1 / 16])
    assert spec.weights.sum() < math.pi ** 2 / 6
    with pytest.raises(ValueError):
        NoiseSpec(0, 0.75, 1.0)
    with pytest.raises(ValueError):
        NoiseSpec(2, 0.5, 1.0)
    with pytest.raises(ValueError):
        NoiseSpec(2, 0.75, 1.0, lam_exponent=1.0)
    assert NoiseSpec(2, 0.5, 1.0, allow_brownian=True).H == 0.5


def test_component_seeds_are_distinct_and_stable():
    s = component_seeds(2024, 8)
    assert len(set(s)) == 8 and s == component_seeds(2024, 8)
    assert component_seeds(2024, 3) == s[:3]


def test_ensemble_paths_independent_of_truncation():
    a, b = ensemble(J=2), ensemble(J=5)
    np.testing.assert_array_equal(a.paths, b.paths[:2])
    assert np.all(a.paths[:, 0] == 0)


def test_field_sample_examples():
    e = ensemble(J=1)
    x = np.linspace(-2, 2, 7)
    assert np.all(field_sample(e, 0.0, x) == 0)
    t = e.tgrid.nodes[5]
    np.testing.assert_allclose(field_sample(e, t, x), basis_eval(1, x, 2.0) * e.paths[0, 5])
    with pytest.raises(ValueError):
        field_sample(e, 0.01, x)


def test_field_variance_within_three_se():
    spec, tg = NoiseSpec(3, 0.7, 2.0), TimeGrid(1.0, 4)
    x = np.array([-1.3, 0.0, 0.6])
    vals = np.array([field_sample(NoiseEnsemble.sample(spec, tg, s), 1.0, x) for s in range(10_000)])
    expected = sum(lam ** 2 * basis_eval(j + 1, x, 2.0) ** 2 for j, lam in enumerate(spec.weights))
    se = math.sqrt(2) * expected / math.sqrt(len(vals))
    assert np.all(np.abs(np.mean(vals ** 2, axis=0) - expected) <= 3 * se)


def test_integral_examples():
    e = ensemble(J=1, N=200)
    M = 9
    assert np.all(integrate_against_WH(np.zeros((1, 201, M)), e, 0.4) == 0)
    g = np.linspace(-1, 2, M)
    F = np.broadcast_to(g, (1, 201, M))
    out = integrate_against_WH(F, e, 0.4)
    np.testing.assert_allclose(out, e.spec.weights[0] * g * e.paths[0, -1], atol=1e-6)
    with pytest.raises(ValueError):
        integrate_against_WH(np.zeros((2, 201, M)), e, 0.4)
    with pytest.raises(ValueError):
        integrate_against_WH(F, e, 0.2)


def test_integral_is_per_node_gls():
    e = ensemble(J=2, N=40)
    rng = np.random.default_rng(1)
    F = rng.normal(size=(2, 41, 3))
    out = integrate_against_WH(F, e, 0.35)
    for k in range(3):
        ref = sum(lam * gls_integral(GridFunction(0.0, 1.0, F[j, :, k]),
                                     GridFunction(0.0, 1.0, e.paths[j]), 0.35)
                  for j, lam in enumerate(e.spec.weights))
        assert out[k] == pytest.approx(ref, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_integral_linear_in_both_arguments(a, b, seed):
    rng = np.random.default_rng(seed)
    e1 = ensemble(J=2, N=20, seed=1)
    e2 = ensemble(J=2, N=20, seed=2)
    F, G = rng.normal(size=(2, 2, 21, 4))
    lin = integrate_against_WH(a * F + b * G, e1, 0.4)
    np.testing.assert_allclose(lin, a * integrate_against_WH(F, e1, 0.4) + b * integrate_against_WH(G, e1, 0.4),
                               atol=1e-11)
    mixed = NoiseEnsemble(e1.spec, e1.tgrid, a * e1.paths + b * e2.paths)
    np.testing.assert_allclose(integrate_against_WH(F, mixed, 0.4),
                               a * integrate_against_WH(F, e1, 0.4) + b * integrate_against_WH(F, e2, 0.4),
                               atol=1e-11)


def test_truncation_stability():
    """Adding components moves the integral by an amount shrinking with J."""
    cfg = small_config(J=16, N=20, M=17)
    big = NoiseEnsemble.sample(cfg.noise, cfg.tgrid, 3)
    E = basis_matrix(16, cfg.xgrid)
    t = cfg.tgrid.nodes[:, None]
    F = (1 + t * np.exp(-cfg.xgrid.nodes ** 2))[None] * E[:, None, :]
    qw = quad_weights(cfg.xgrid)

    def value(J):
        sub = NoiseEnsemble(NoiseSpec(J, 0.75, cfg.xgrid.L), cfg.tgrid, big.paths[:J])
        return integrate_against_WH(F[:J], sub, cfg.sigma)

    ref = value(16)
    gaps = [math.sqrt(qw @ (value(J) - ref) ** 2) for J in (2, 4, 8)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_ineg_ratio_bounded_on_random_integrands():
    cfg = small_config(J=3, N=16)
    e = NoiseEnsemble.sample(cfg.noise, cfg.tgrid, 5)
    E = basis_matrix(3, cfg.xgrid)
    rng = np.random.default_rng(0)
    ratios = []
    for _ in range(10):
        amp = rng.normal(size=(17, 1)) * np.exp(-cfg.xgrid.nodes ** 2)[None, :]
        F = (1 + np.cumsum(amp, axis=0) / 4)[None] * E[:, None, :]
        ratios.append(ineg_ratio(F, e, cfg.sigma, cfg.xgrid)["ratio"])
    assert all(0 < r <= 1 for r in ratios)
    assert max(ratios) / min(ratios) < 100


def test_xi_window():
    e = ensemble()
    assert e.xi(0.4) > 0
    with pytest.raises(ValueError):
        e.xi(0.2)


def test_bundle_round_trip(tmp_path):
    e = ensemble(J=2, N=8, seed=42)
    files = write_bundle(e, tmp_path / "noise")
    assert [f.name for f in files] == ["component_001.csv", "component_002.csv", "noise_manifest.json"]
    back = read_bundle(tmp_path / "noise")
    np.testing.assert_array_equal(back.paths, e.paths)
    assert back.seeds == e.seeds and back.spec == e.spec
    again = write_bundle(e, tmp_path / "again")
    assert all(a.read_bytes() == b.read_bytes() for a, b in zip(files, again))
