"""Fractional Brownian motion on a uniform time grid.

Paths are built from fractional Gaussian noise sampled by circulant embedding
(Davies and Harte), with an exact Cholesky factorisation as fallback and as
the test oracle.  The module also provides the discrete Hoelder-type
seminorm that controls a path as an integrator and the weighted sum ``xi``
of those seminorms over the components of a noise ensemble.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .core import TimeGrid


def check_hurst(H: float, allow_brownian: bool = False) -> float:
    """Validate a Hurst index; ``H`` must lie in ``(1/2, 1)``.

    ``allow_brownian`` additionally admits ``H = 1/2`` (smoke runs only).
    """
    H = float(H)
    if allow_brownian and H == 0.5:
        return H
    if not 0.5 < H < 1.0:
        raise ValueError(f"Hurst index must satisfy 1/2 < H < 1, got {H}")
    return H


def fbm_cov(H: float, t, s):
    """Covariance ``E[B(t) B(s)] = (t^2H + s^2H - |t-s|^2H) / 2``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise ValueError("fbm_cov needs nonnegative times")
    out = 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(out) if out.ndim == 0 else out


def fgn_autocov(H: float, n: int) -> np.ndarray:
    """Autocovariance ``gamma(k)``, ``k = 0..n-1``, of unit-step fractional Gaussian noise."""
    k = np.arange(n, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


def _circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    g = fgn_autocov(H, n + 1)
    row = np.concatenate([g[:n], g[n:n + 1], g[n - 1:0:-1]])
    return np.fft.fft(row).real


def _fgn_cholesky_factor(H: float, n: int) -> np.ndarray:
    g = fgn_autocov(H, n)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    try:
        return np.linalg.cholesky(g[idx])
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"fGn covariance not positive definite (H={H}, n={n})") from exc


def sample_fgn(H: float, n: int, rng: np.random.Generator, size: int | None = None,
               method: str = "auto") -> np.ndarray:
    """Unit-step fractional Gaussian noise of length ``n``.

    With ``size`` given, returns an array of shape ``(size, n)``.  ``method``
    is ``"auto"`` (circulant embedding, Cholesky if the embedding has a
    negative eigenvalue), ``"davies-harte"`` or ``"cholesky"``.
    """
    shape = (1 if size is None else size, n)
    if method not in ("auto", "davies-harte", "cholesky"):
        raise ValueError(f"unknown method {method!r}")
    lam = None
    if method != "cholesky":
        lam = _circulant_eigenvalues(H, n)
        # round-off can push zero eigenvalues slightly negative
        tol = 1e-10 * np.max(np.abs(lam))
        if np.min(lam) < -tol:
            if method == "davies-harte":
                raise RuntimeError("circulant embedding is not nonnegative definite")
            warnings.warn(f"circulant embedding failed for H={H}, n={n}; using Cholesky")
            lam = None
        else:
            lam = np.clip(lam, 0.0, None)
    if lam is None:
        chol = _fgn_cholesky_factor(H, n)
        out = rng.standard_normal(shape) @ chol.T
    else:
        m = 2 * n
        z = rng.standard_normal((shape[0], m)) + 1j * rng.standard_normal((shape[0], m))
        out = np.fft.fft(np.sqrt(lam / m) * z, axis=1)[:, :n].real
    return out[0] if size is None else out


@dataclass(frozen=True)
class FbmPath:
    """One fBm trajectory ``values[i] = B(t_i)`` with ``values[0] = 0``."""

    H: float
    grid: TimeGrid
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N + 1,):
            raise ValueError(f"path needs {self.grid.N + 1} values, got {v.shape}")
        if v[0] != 0.0:
            raise ValueError("fBm paths start at the origin")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_csv(self, path) -> None:
        write_path_csv(path, self.grid.nodes, self.values)


def write_path_csv(path, t, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for ti, vi in zip(t, values):
            w.writerow([f"{ti:.17g}", f"{vi:.17g}"])


def read_path_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def _increments_to_paths(fgn: np.ndarray, grid: TimeGrid, H: float) -> np.ndarray:
    scale = grid.dt ** H
    paths = np.zeros(fgn.shape[:-1] + (grid.N + 1,))
    paths[..., 1:] = np.cumsum(fgn * scale, axis=-1)
    return paths


def sample_fbm(H: float, grid: TimeGrid, seed: int, method: str = "auto",
               allow_brownian: bool = False) -> FbmPath:
    """Sample one fBm path; deterministic in ``(H, N, T, seed)``."""
    H = check_hurst(H, allow_brownian)
    rng = np.random.default_rng(seed)
    fgn = sample_fgn(H, grid.N, rng, method=method)
    return FbmPath(H, grid, _increments_to_paths(fgn, grid, H), seed=seed)


def sample_fbm_batch(H: float, grid: TimeGrid, n_paths: int, seed: int,
                     method: str = "auto", chunk: int = 2000,
                     allow_brownian: bool = False) -> np.ndarray:
    """``n_paths`` independent paths as an array of shape ``(n_paths, N + 1)``."""
    H = check_hurst(H, allow_brownian)
    rng = np.random.default_rng(seed)
    out = np.empty((n_paths, grid.N + 1))
    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        fgn = sample_fgn(H, grid.N, rng, size=stop - start, method=method)
        out[start:stop] = _increments_to_paths(fgn, grid, H)
    return out


def _abs_power_integral(g0, g1, w0, w1, p):
    """``int_{w0}^{w1} |g(w)| w^p dw`` for ``g`` linear from ``g0`` to ``g1``.

    Requires ``w0 > 0`` and ``p`` not in ``{-1, -2}``.
    """
    slope = (g1 - g0) / (w1 - w0)
    alpha = g0 - slope * w0

    def prim(w):
        return alpha * w ** (p + 1) / (p + 1) + slope * w ** (p + 2) / (p + 2)

    crosses = (g0 * g1) < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(crosses, w0 - g0 / np.where(slope == 0, 1.0, slope), w0)
    plain = np.abs(prim(w1) - prim(w0))
    split = np.abs(prim(root) - prim(w0)) + np.abs(prim(w1) - prim(root))
    return np.where(crosses, split, plain)


def holder_seminorm(values, sigma: float, grid: TimeGrid, t: float | None = None) -> float:
    """Discrete version of the seminorm

        sup_{u < v <= t} |f(u)-f(v)| / (v-u)^(1-sigma)
                         + int_u^v |f(u)-f(z)| / (z-u)^(2-sigma) dz.

    The sup runs over grid pairs; the inner integral is exact for the
    piecewise-linear interpolant of ``values``.
    """
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    f = np.asarray(values, dtype=float)
    n = grid.N if t is None else grid.index_of(t)
    f = f[: n + 1]
    h = grid.dt
    best = 0.0
    for a in range(n):
        g = f[a:] - f[a]
        # first panel: g = g[1] * w / h
        first = abs(g[1]) * h ** (sigma - 1) / sigma
        m = len(g) - 1
        if m > 1:
            w = np.arange(1, m) * h
            rest = _abs_power_integral(g[1:-1], g[2:], w, w + h, sigma - 2)
            inner = np.concatenate([[first], first + np.cumsum(rest)])
        else:
            inner = np.array([first])
        lag = np.arange(1, m + 1) * h
        total = np.abs(g[1:]) / lag ** (1 - sigma) + inner
        best = max(best, float(total.max()))
    return best


def xi_factor(paths, weights, sigma: float) -> float:
    """``xi = sum_j lambda_j ||B_j||_{sigma,0,T}`` for the given paths."""
    weights = np.asarray(weights, dtype=float)
    if len(paths) != len(weights):
        raise ValueError("need one weight per path")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    total = 0.0
    for lam, p in zip(weights, paths):
        if not 1 - p.H < sigma < 0.5:
            raise ValueError(f"sigma={sigma} outside the admissible window (1-H, 1/2) for H={p.H}")
        total += lam * holder_seminorm(p.values, sigma, p.grid)
    return total
