import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracheat.core import TimeGrid
from fracheat.fbm import (FbmPath, _circulant_eigenvalues, check_hurst, fbm_cov, fgn_autocov, holder_seminorm,
                          read_path_csv, sample_fbm, sample_fbm_batch, sample_fgn, xi_factor)


def test_fbm_cov_examples():
    assert fbm_cov(0.5, 2.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    for H in (0.55, 0.75, 0.95):
        assert fbm_cov(H, 1.0, 1.0) == 1.0
    assert fbm_cov(0.75, 1.0, 0.5) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        fbm_cov(0.75, -1.0, 0.5)


@given(st.floats(0.51, 0.99), st.floats(0, 10), st.floats(0, 10))
def test_fbm_cov_symmetric_and_diagonal(H, t, s):
    assert fbm_cov(H, t, s) == fbm_cov(H, s, t)
    assert fbm_cov(H, t, t) == pytest.approx(t ** (2 * H), rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("H", [0.4, 0.5, 1.0, 1.2])
def test_hurst_window(H):
    with pytest.raises(ValueError):
        check_hurst(H)


def test_brownian_override():
    assert check_hurst(0.5, allow_brownian=True) == 0.5
    with pytest.raises(ValueError):
        check_hurst(0.4, allow_brownian=True)


def test_same_seed_bitwise_identical():
    g = TimeGrid(1.0, 64)
    a = sample_fbm(0.7, g, 99).values
    b = sample_fbm(0.7, g, 99).values
    assert a.tobytes() == b.tobytes()
    assert sample_fbm(0.7, g, 100).values.tobytes() != a.tobytes()


def test_path_starts_at_zero_and_rejects_bad_values():
    g = TimeGrid(1.0, 4)
    assert sample_fbm(0.8, g, 1).values[0] == 0.0
    with pytest.raises(ValueError):
        FbmPath(0.8, g, np.array([1.0, 0, 0, 0, 0]))
    with pytest.raises(ValueError):
        FbmPath(0.8, g, np.zeros(3))


def test_circulant_matches_cholesky_covariance(rng):
    """Both samplers have the fGn Toeplitz covariance; compare empirical autocovariances."""
    H, n = 0.8, 16
    dh = sample_fgn(H, n, rng, size=20000, method="davies-harte")
    ch = sample_fgn(H, n, rng, size=20000, method="cholesky")
    g = fgn_autocov(H, n)
    for x in (dh, ch):
        emp = np.array([np.mean(x[:, 0] * x[:, k]) for k in range(n)])
        # standard error of a product of unit-variance Gaussians is at most sqrt(2 / n)
        assert np.all(np.abs(emp - g) < 4 * math.sqrt(2 / len(x)))


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_circulant_construction_has_exact_covariance(H):
    """The linear map behind the circulant sampler reproduces the fGn Toeplitz matrix."""
    n = 64
    lam = np.clip(_circulant_eigenvalues(H, n), 0, None)
    A = np.fft.fft(np.diag(np.sqrt(lam / (2 * n))), axis=0)[:n]
    cov = (A @ A.conj().T).real
    g = fgn_autocov(H, n)
    toeplitz = g[np.abs(np.subtract.outer(np.arange(n), np.arange(n)))]
    assert np.max(np.abs(cov - toeplitz)) <= 1e-13


def test_brownian_variance_within_three_se():
    g = TimeGrid(2.0, 32)
    paths = sample_fbm_batch(0.5, g, 10_000, seed=3, allow_brownian=True)
    end = paths[:, -1]
    se = math.sqrt(2) * 2.0 / math.sqrt(len(end))
    assert abs(np.mean(end ** 2) - 2.0) < 3 * se


def test_csv_round_trip(tmp_path):
    p = sample_fbm(0.7, TimeGrid(1.0, 10), 5)
    p.to_csv(tmp_path / "p.csv")
    t, v = read_path_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(t, p.grid.nodes)
    np.testing.assert_array_equal(v, p.values)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t,value"


def test_seminorm_examples():
    g = TimeGrid(1.0, 200)
    assert holder_seminorm(np.full(201, 3.0), 0.4, g) == 0.0
    # f(z) = z: (v-u)^sigma (1 + 1/sigma), largest at v-u = 1
    assert holder_seminorm(g.nodes, 0.5, g) == pytest.approx(3.0, rel=1e-12)
    f = np.sin(5 * g.nodes)
    assert holder_seminorm(2 * f, 0.3, g) == pytest.approx(2 * holder_seminorm(f, 0.3, g), rel=1e-13)


def test_seminorm_monotone_in_t():
    g = TimeGrid(1.0, 40)
    f = sample_fbm(0.7, g, 2).values
    vals = [holder_seminorm(f, 0.35, g, t) for t in g.nodes[1:]]
    assert np.all(np.diff(vals) >= 0)
    with pytest.raises(ValueError):
        holder_seminorm(f, 0.35, g, 0.013)


def test_seminorm_refinement_lipschitz():
    coarse, fine = TimeGrid(1.0, 50), TimeGrid(1.0, 100)
    fun = lambda t: np.sin(3 * t) + t ** 2  # noqa: E731
    a = holder_seminorm(fun(coarse.nodes), 0.4, coarse)
    b = holder_seminorm(fun(fine.nodes), 0.4, fine)
    assert b >= a * (1 - 0.02)


def test_xi_examples():
    g = TimeGrid(1.0, 50)
    zero = FbmPath(0.75, g, np.zeros(51))
    assert xi_factor([zero, zero], [1.0, 0.25], 0.4) == 0.0
    line = FbmPath(0.75, g, g.nodes.copy())
    assert xi_factor([line], [1.0], 0.49) == pytest.approx(holder_seminorm(g.nodes, 0.49, g))
    paths = [sample_fbm(0.75, g, s) for s in (1, 2)]
    assert xi_factor(paths, [2.0, 0.5], 0.4) == pytest.approx(2 * xi_factor(paths, [1.0, 0.25], 0.4))
    with pytest.raises(ValueError):
        xi_factor([line], [1.0], 0.2)


@given(st.lists(st.floats(0.01, 5), min_size=2, max_size=2), st.floats(0, 3))
def test_xi_monotone_in_weights(w, extra):
    g = TimeGrid(1.0, 20)
    paths = [sample_fbm(0.75, g, s) for s in (11, 12)]
    assert xi_factor(paths, [w[0] + extra, w[1]], 0.4) >= xi_factor(paths, w, 0.4)
