"""Truncated L2-valued fractional Brownian motion ``W(t, x) = sum_j lambda_j e_j(x) B_j(t)``
and pathwise integration against it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import SpaceGrid, TimeGrid, l2_norms, quad_weights
from .fbm import (FbmPath, _abs_power_integral, check_hurst, holder_seminorm, read_path_csv,
                  sample_fbm, write_path_csv)
from .fraccalc import check_order, gls_constant, gls_functional, lag_singular_integral


def basis_eval(j: int, x, L: float):
    """Orthonormal family on ``[-L, L]``, zero outside.

    ``e_1`` is the constant ``(2L)^-1/2``; ``e_{2m} = cos(m pi x / L) / sqrt(L)``
    and ``e_{2m+1} = sin(m pi x / L) / sqrt(L)``.
    """
    if j < 1:
        raise ValueError("basis index starts at 1")
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) <= L
    if j == 1:
        val = np.full(x.shape, 1 / math.sqrt(2 * L))
    else:
        m = j // 2
        trig = np.cos if j % 2 == 0 else np.sin
        val = trig(m * math.pi * x / L) / math.sqrt(L)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def basis_matrix(J: int, grid: SpaceGrid) -> np.ndarray:
    """Rows ``e_1 .. e_J`` sampled on ``grid`` (shape ``(J, M)``)."""
    return np.stack([basis_eval(j, grid.nodes, grid.L) for j in range(1, J + 1)])


@dataclass(frozen=True)
class NoiseSpec:
    """Truncation ``J``, Hurst index, window half-width and weights ``lambda_j = j^-p``."""

    J: int
    H: float
    L: float
    lam_exponent: float = 2.0
    allow_brownian: bool = False

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J}")
        check_hurst(self.H, self.allow_brownian)
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not self.lam_exponent > 1:
            raise ValueError("weight exponent must exceed 1 for summability")

    @property
    def weights(self) -> np.ndarray:
        return np.arange(1, self.J + 1, dtype=float) ** -self.lam_exponent

    def to_dict(self) -> dict:
        return {"J": self.J, "H": self.H, "L": self.L, "lam_exponent": self.lam_exponent}


def component_seeds(master_seed: int, J: int) -> list[int]:
    """Independent per-component seeds spawned from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(J)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


@dataclass(frozen=True)
class NoiseEnsemble:
    """``J`` independent fBm paths on a common time grid together with their spec."""

    spec: NoiseSpec
    tgrid: TimeGrid
    paths: np.ndarray
    seeds: tuple = ()

    def __post_init__(self):
        P = np.asarray(self.paths, dtype=float)
        if P.shape != (self.spec.J, self.tgrid.N + 1):
            raise ValueError(f"paths shape {P.shape} does not match (J, N+1)")
        if np.any(P[:, 0] != 0):
            raise ValueError("every path must start at 0")
        P.setflags(write=False)
        object.__setattr__(self, "paths", P)

    @classmethod
    def sample(cls, spec: NoiseSpec, tgrid: TimeGrid, master_seed: int) -> "NoiseEnsemble":
        seeds = component_seeds(master_seed, spec.J)
        paths = [sample_fbm(spec.H, tgrid, s, allow_brownian=spec.allow_brownian).values
                 for s in seeds]
        return cls(spec, tgrid, np.stack(paths), tuple(seeds))

    def fbm_paths(self) -> list[FbmPath]:
        return [FbmPath(self.spec.H, self.tgrid, p, s)
                for p, s in zip(self.paths, self.seeds or [None] * self.spec.J)]

    def xi(self, sigma: float) -> float:
        """``sum_j lambda_j ||B_j||_{sigma,0,T}``."""
        if not 1 - self.spec.H < sigma < 0.5:
            raise ValueError(f"sigma={sigma} outside (1-H, 1/2)")
        return float(sum(lam * holder_seminorm(p, sigma, self.tgrid)
                         for lam, p in zip(self.spec.weights, self.paths)))


def field_sample(ensemble: NoiseEnsemble, t: float, x):
    """Truncated series ``sum_j lambda_j e_j(x) B_j(t)``."""
    i = ensemble.tgrid.index_of(t)
    spec = ensemble.spec
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for j in range(1, spec.J + 1):
        total = total + spec.weights[j - 1] * basis_eval(j, x, spec.L) * ensemble.paths[j - 1, i]
    return float(total) if total.ndim == 0 else total


def _check_window(sigma: float, H: float) -> float:
    sigma = check_order(sigma)
    if not 1 - H < sigma < 0.5:
        raise ValueError(f"sigma={sigma} outside the window (1-H, 1/2) for H={H}")
    return sigma


def integrate_against_WH(F, ensemble: NoiseEnsemble, sigma: float, upto: int | None = None):
    """``sum_j lambda_j int_0^{t} F_j(s, .) dB_j(s)`` as a space row.

    ``F`` has shape ``(J, i+1, M)``: ``F[j, k]`` is the space function
    ``(F(s_k) e_{j+1})`` on the time nodes ``s_0..s_i`` of ``[0, t_i]``;
    ``upto`` defaults to ``i``.  The sum runs in ascending ``j``.
    """
    F = np.asarray(F, dtype=float)
    spec = ensemble.spec
    sigma = _check_window(sigma, spec.H)
    if F.ndim != 3 or F.shape[0] != spec.J:
        raise ValueError(f"need one integrand per component: got {F.shape[:1]}, J={spec.J}")
    i = F.shape[1] - 1 if upto is None else upto
    if F.shape[1] != i + 1 or i < 1:
        raise ValueError("integrand time length does not match the interval")
    h = ensemble.tgrid.dt
    out = np.zeros(F.shape[2])
    for j in range(spec.J):
        c = gls_functional(ensemble.paths[j, : i + 1], h, sigma)
        out += spec.weights[j] * (c @ F[j])
    return out


def ineg_ratio(F, ensemble: NoiseEnsemble, sigma: float, xgrid: SpaceGrid) -> dict:
    """Ratio of ``||integral||_2`` to its a-priori bound

        C xi sup_j int_0^t (||F_j(s)||_2 s^-sigma
                            + int_0^s ||F_j(s) - F_j(r)||_2 (s-r)^(-1-sigma) dr) ds,

    with ``C = 1 / (Gamma(sigma) Gamma(1-sigma))`` and ``xi`` taken over ``[0, t]``.
    """
    F = np.asarray(F, dtype=float)
    sigma = _check_window(sigma, ensemble.spec.H)
    i = F.shape[1] - 1
    h = ensemble.tgrid.dt
    lhs = math.sqrt(np.sum(quad_weights(xgrid) * integrate_against_WH(F, ensemble, sigma) ** 2))
    sub = TimeGrid(i * h, i)
    xi = sum(lam * holder_seminorm(p[: i + 1], sigma, sub)
             for lam, p in zip(ensemble.spec.weights, ensemble.paths))
    tw = np.full(i + 1, h)
    tw[0] = tw[-1] = h / 2
    lags = np.arange(i) * h
    sups = []
    for Fj in F:
        norms = l2_norms(Fj, xgrid)
        first = np.sum(_abs_power_integral(norms[:-1], norms[1:], lags, lags + h, -sigma))
        incr = [lag_singular_integral(l2_norms(Fj[m::-1] - Fj[m], xgrid), h, sigma)
                for m in range(i + 1)]
        sups.append(first + tw @ np.array(incr))
    rhs = gls_constant(sigma) * xi * max(sups)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio}


# -- serialisation ----------------------------------------------------------------

def write_bundle(ensemble: NoiseEnsemble, outdir) -> list[Path]:
    """One CSV per component plus ``noise_manifest.json``; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for j in range(ensemble.spec.J):
        path = outdir / f"component_{j + 1:03d}.csv"
        write_path_csv(path, ensemble.tgrid.nodes, ensemble.paths[j])
        files.append(path)
    manifest = {
        **ensemble.spec.to_dict(),
        "T": ensemble.tgrid.T,
        "N": ensemble.tgrid.N,
        "lambda_rule": f"j^-{ensemble.spec.lam_exponent:g}",
        "seeds": [int(s) for s in ensemble.seeds],
        "files": [p.name for p in files],
    }
    mpath = outdir / "noise_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files + [mpath]


def read_bundle(outdir, allow_brownian: bool = False) -> NoiseEnsemble:
    outdir = Path(outdir)
    man = json.loads((outdir / "noise_manifest.json").read_text())
    spec = NoiseSpec(man["J"], man["H"], man["L"], man["lam_exponent"], allow_brownian)
    tgrid = TimeGrid(man["T"], man["N"])
    paths = np.stack([read_path_csv(outdir / name)[1] for name in man["files"]])
    return NoiseEnsemble(spec, tgrid, paths, tuple(man["seeds"]))
