"""Mild solutions of the two-medium heat equation driven by the truncated fBm field.

The mild-solution map is

    (A u)(t, x) = sum_j lambda_j int_0^t zeta_{j,t}(u)(s, x) dB_j(s),
    zeta_{j,t}(u)(s, x) = int G(t - s, x, y) h(u(s, y)) e_j(y) dy,

with affine ``h(z) = h1 z + h2`` and generalized Stieltjes integrals in
time.  Discretely, the space integral is exact for the piecewise-linear
interpolant of ``h(u) e_j`` (transfer matrices from :mod:`fracheat.kernel`),
and the time integral is the linear functional of :mod:`fracheat.fraccalc`.
Because that functional puts zero weight on ``s = t``, ``(A u)(t_i)`` only
reads ``u`` at earlier nodes, and ``zeta`` is never evaluated at its
singular endpoint.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import CheckRecord, SpaceGrid, SpaceTimeField, TimeGrid, l2_norms, quad_weights
from .fraccalc import gls_functional, norm_sigma_2, norm_sigma_2_profile
from .kernel import MediumParams, transfer_matrices
from .noise_field import NoiseEnsemble, NoiseSpec, basis_matrix


class ConfigError(ValueError):
    """Invalid solver configuration."""


@dataclass(frozen=True)
class AffineCoefficient:
    """``h(z) = h1 z + h2``."""

    h1: float
    h2: float

    def __post_init__(self):
        if not (math.isfinite(self.h1) and math.isfinite(self.h2)):
            raise ConfigError("h1 and h2 must be finite")

    def __call__(self, z):
        return self.h1 * z + self.h2


def default_sigma(H: float) -> float:
    """Midpoint of the admissible window ``(1 - H, 1/2)``."""
    return 0.5 * ((1 - H) + 0.5)


@dataclass(frozen=True)
class SolverConfig:
    medium: MediumParams
    tgrid: TimeGrid
    xgrid: SpaceGrid
    noise: NoiseSpec
    h: AffineCoefficient = AffineCoefficient(0.5, 1.0)
    sigma: float | None = None
    tol: float = 1e-6
    p_max: int = 8
    threads: int = 1

    def __post_init__(self):
        H = self.noise.H
        if self.sigma is None:
            object.__setattr__(self, "sigma", default_sigma(H))
        if not 1 - H < self.sigma < 0.5:
            raise ConfigError(f"sigma={self.sigma} outside the window (1-H, 1/2) for H={H}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if int(self.p_max) != self.p_max or self.p_max < 1:
            raise ConfigError("p_max must be a positive integer")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if abs(self.noise.L - self.xgrid.L) > 1e-12 * self.xgrid.L:
            raise ConfigError("noise window and space grid disagree on L")


@dataclass
class PicardDiagnostics:
    """Convergence record of one Picard run.

    ``differences[p-1] = ||u_p - u_{p-1}||_{sigma,2,T}``; ``envelope`` is the
    fitted curve ``(C xi^2)^p T^(p-1) / (p-1)!`` for the squared differences.
    """

    differences: list
    residual: float
    xi: float
    iterations: int
    status: str
    solution_norm: float
    envelope_constant: float | None = None
    envelope: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "differences": [float(d) for d in self.differences],
            "residual": float(self.residual),
            "solution_norm": float(self.solution_norm),
            "xi": float(self.xi),
            "envelope_constant": None if self.envelope_constant is None
            else float(self.envelope_constant),
            "envelope": [float(e) for e in self.envelope],
        }


@lru_cache(maxsize=4)
def kernel_stack(tgrid: TimeGrid, xgrid: SpaceGrid, medium: MediumParams) -> np.ndarray:
    """Transfer matrices for the lags ``0, dt, ..., N dt`` (shape ``(N+1, M, M)``)."""
    out = transfer_matrices(tgrid.nodes, xgrid, medium)
    out.setflags(write=False)
    return out


def _check_ensemble(ensemble: NoiseEnsemble, cfg: SolverConfig):
    if ensemble.tgrid != cfg.tgrid:
        raise ConfigError("ensemble and configuration use different time grids")
    if ensemble.spec.J != cfg.noise.J or ensemble.spec.H != cfg.noise.H:
        raise ConfigError("ensemble does not match the configured noise")


def _check_field(u: SpaceTimeField, cfg: SolverConfig):
    if u.tgrid != cfg.tgrid or u.xgrid != cfg.xgrid:
        raise ConfigError("field does not live on the configured grids")


class MildOperator:
    """Precomputed discrete version of ``A`` for one configuration and ensemble."""

    def __init__(self, cfg: SolverConfig, ensemble: NoiseEnsemble):
        _check_ensemble(ensemble, cfg)
        self.cfg = cfg
        self.ensemble = ensemble
        self.kernels = kernel_stack(cfg.tgrid, cfg.xgrid, cfg.medium)
        self.basis = basis_matrix(cfg.noise.J, cfg.xgrid)
        weighted = ensemble.spec.weights[:, None] * self.basis
        h = cfg.tgrid.dt
        # mix[i][k] = sum_j lambda_j c^{(i,j)}_k e_j: the time weight of s_k in (A u)(t_i)
        self.mix = [None]
        for i in range(1, cfg.tgrid.N + 1):
            C = np.stack([gls_functional(ensemble.paths[j, : i + 1], h, cfg.sigma)
                          for j in range(cfg.noise.J)])
            self.mix.append(np.einsum("jk,jm->km", C, weighted))

    def _row(self, i: int, g: np.ndarray) -> np.ndarray:
        V = g[: i + 1] * self.mix[i]
        K = self.kernels[i::-1]
        return np.einsum("kab,kb->a", K, V)

    def apply(self, u: SpaceTimeField) -> SpaceTimeField:
        _check_field(u, self.cfg)
        g = self.cfg.h(u.values)
        N = self.cfg.tgrid.N
        out = np.zeros_like(u.values)
        rows = range(1, N + 1)
        if self.cfg.threads > 1:
            with ThreadPoolExecutor(self.cfg.threads) as pool:
                for i, row in zip(rows, pool.map(lambda i: self._row(i, g), rows)):
                    out[i] = row
        else:
            for i in rows:
                out[i] = self._row(i, g)
        return SpaceTimeField(out, u.tgrid, u.xgrid)


def zeta(u: SpaceTimeField, j: int, t: float, cfg: SolverConfig) -> np.ndarray:
    """``zeta_{j,t}(u)(s_k, .)`` for the nodes ``s_k < t``; shape ``(i, M)``.

    ``j`` is 1-based.  Rows are exact space integrals of ``G`` against the
    interpolant of ``h(u(s_k)) e_j``.
    """
    _check_field(u, cfg)
    i = cfg.tgrid.index_of(t)
    if not 1 <= j <= cfg.noise.J:
        raise ConfigError(f"component {j} outside 1..{cfg.noise.J}")
    K = kernel_stack(cfg.tgrid, cfg.xgrid, cfg.medium)
    ej = basis_matrix(j, cfg.xgrid)[-1]
    g = cfg.h(u.values[:i]) * ej
    return np.einsum("kab,kb->ka", K[i:0:-1], g)


def apply_A(u: SpaceTimeField, ensemble: NoiseEnsemble, cfg: SolverConfig,
            op: MildOperator | None = None) -> SpaceTimeField:
    """One application of the mild-solution map."""
    op = MildOperator(cfg, ensemble) if op is None else op
    return op.apply(u)


def residual_mild(u: SpaceTimeField, ensemble: NoiseEnsemble, cfg: SolverConfig,
                  op: MildOperator | None = None) -> float:
    """``||u - A u||_{sigma,2,T}``."""
    Au = apply_A(u, ensemble, cfg, op)
    return norm_sigma_2(u - Au, cfg.sigma, cfg.tgrid.T)


def _fit_envelope(diffs, xi: float, T: float):
    """Fit ``d_p^2 ~ (C xi^2)^p T^(p-1) / (p-1)!`` by least squares in ``p``."""
    p = np.arange(1, len(diffs) + 1, dtype=float)
    d = np.asarray(diffs, dtype=float)
    keep = d > 0
    if keep.sum() < 2 or xi == 0:
        return None, []
    lg = np.array([math.lgamma(k) for k in p])
    y = np.log(d[keep] ** 2) + lg[keep] + math.log(T)
    slope, icpt = np.polyfit(p[keep], y, 1)
    # y = p log(C xi^2 T) + offset; the offset absorbs the scale of d_1
    c = math.exp(slope) / (xi ** 2 * T)
    env = np.sqrt(np.exp(icpt + p * slope - lg - math.log(T)))
    return c, env.tolist()


def picard_solve(cfg: SolverConfig, ensemble: NoiseEnsemble,
                 u0: SpaceTimeField | None = None,
                 op: MildOperator | None = None) -> tuple[SpaceTimeField, PicardDiagnostics]:
    """Iterate ``u_{p+1} = A u_p`` from ``u0`` (default 0) until a difference is ``<= tol``.

    Hitting ``p_max`` is reported through ``status``, with the last iterate.
    """
    op = MildOperator(cfg, ensemble) if op is None else op
    u = SpaceTimeField.zeros(cfg.tgrid, cfg.xgrid) if u0 is None else u0
    _check_field(u, cfg)
    if np.any(u.values[0] != 0):
        raise ConfigError("the initial guess must vanish at t = 0")
    diffs = []
    status = "max_iterations"
    for _ in range(cfg.p_max):
        nxt = op.apply(u)
        diffs.append(norm_sigma_2(nxt - u, cfg.sigma, cfg.tgrid.T))
        u = nxt
        if diffs[-1] <= cfg.tol:
            status = "converged"
            break
    res = residual_mild(u, ensemble, cfg, op)
    xi = ensemble.xi(cfg.sigma)
    c, env = _fit_envelope(diffs, xi, cfg.tgrid.T)
    diag = PicardDiagnostics(diffs, res, xi, len(diffs), status,
                             norm_sigma_2(u, cfg.sigma, cfg.tgrid.T), c, env)
    return u, diag


def contraction_check(u: SpaceTimeField, v: SpaceTimeField, ensemble: NoiseEnsemble,
                      cfg: SolverConfig, op: MildOperator | None = None) -> CheckRecord:
    """``||A u - A v||^2_{sigma,2,t}`` against ``xi^2 int_0^t ||u - v||^2_{sigma,2,s} ds``."""
    if not u.same_grids(v):
        raise ConfigError("fields live on different grids")
    op = MildOperator(cfg, ensemble) if op is None else op
    xi = ensemble.xi(cfg.sigma)
    num = norm_sigma_2_profile(op.apply(u) - op.apply(v), cfg.sigma) ** 2
    prof = norm_sigma_2_profile(u - v, cfg.sigma) ** 2
    h = cfg.tgrid.dt
    den = xi ** 2 * np.concatenate([[0.0], np.cumsum(0.5 * h * (prof[1:] + prof[:-1]))])
    ratios = _safe_ratio(num[1:], den[1:])
    sup = float(np.max(ratios))
    return CheckRecord("prop12", len(ratios), sup, bool(math.isfinite(sup)),
                       {"numerator_max": float(num.max())})


# -- appendix diagnostics ----------------------------------------------------

def _safe_ratio(lhs, shape):
    lhs = np.asarray(lhs, dtype=float)
    shape = np.asarray(shape, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(shape > 0, lhs / np.where(shape > 0, shape, 1.0),
                     np.where(lhs == 0, 0.0, np.inf))
    return r


def smooth_test_field(cfg: SolverConfig, seed: int, scale: float = 1.0) -> SpaceTimeField:
    """A random smooth field vanishing at ``t = 0``: ``scale * sum_m a_m t^m bump_m(x)``."""
    rng = np.random.default_rng(seed)
    t = cfg.tgrid.nodes[:, None] / cfg.tgrid.T
    x = cfg.xgrid.nodes[None, :]
    out = np.zeros((cfg.tgrid.N + 1, cfg.xgrid.M))
    for m in range(1, 4):
        a, c, w = rng.normal(), rng.uniform(-0.5, 0.5) * cfg.xgrid.L, rng.uniform(0.5, 2.0)
        out += a * t ** m * np.exp(-((x - c) / w) ** 2) * math.cos(m * rng.uniform(0, 3))
    return SpaceTimeField(scale * out, cfg.tgrid, cfg.xgrid)


class _ZetaCache:
    """Rows ``zeta_{j,t}(u)(s)`` keyed by ``(field id, j, t index, s index)``."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.K = kernel_stack(cfg.tgrid, cfg.xgrid, cfg.medium)
        self.E = basis_matrix(cfg.noise.J, cfg.xgrid)
        self.store = {}

    def __call__(self, tag, u, j, ti, si):
        key = (tag, j, ti, si)
        if key not in self.store:
            self.store[key] = self.K[ti - si] @ (self.cfg.h(u.values[si]) * self.E[j - 1])
        return self.store[key]


def _probe_times(rng, N: int, count: int, n_times: int):
    """``count`` strictly increasing tuples of ``n_times`` distinct indices in ``1..N-1``."""
    out = []
    while len(out) < count:
        out.append(tuple(sorted(rng.choice(np.arange(1, N), n_times, replace=False))))
    return out


def _check_window(name, value, lo):
    if not lo < value < 1:
        raise ValueError(f"{name}={value} outside ({lo:.4g}, 1)")


def appendix_bound_suite(cfg: SolverConfig, ensemble: NoiseEnsemble, probes: int = 200,
                         seed: int = 0, delta: float = 0.5, delta_prime: float = 0.4,
                         fields: tuple | None = None) -> list[dict]:
    """Empirical sup-ratios of the auxiliary ``zeta`` estimates and of the two
    a-priori bounds for ``A``; one JSON-able record per clause.

    ``delta`` must lie in ``(1/3, 1)`` and ``delta_prime`` in ``(1/5, 1)``;
    out-of-window exponents produce rejected records.  ``fields`` is an
    optional pair ``(u, v)``; by default two random smooth fields are used.
    The ``*_identical`` records use ``v = u`` and must be exactly 0.
    """
    records = []

    def rejected(name, exc):
        records.append(CheckRecord.rejected(name, str(exc)).to_dict())

    try:
        _check_window("delta", delta, 1 / 3)
        _check_window("delta_prime", delta_prime, 1 / 5)
    except ValueError as exc:
        for name in ("lemma8", "lemma9", "lemma9b", "lemma10"):
            rejected(name, exc)
        return records
    N = cfg.tgrid.N
    if N < 5:
        rejected("appendix", f"need N >= 5 for four-time probes, got {N}")
        return records
    _check_ensemble(ensemble, cfg)
    rng = np.random.default_rng(seed)
    u, v = fields if fields is not None else (smooth_test_field(cfg, seed + 1),
                                              smooth_test_field(cfg, seed + 2))
    z = _ZetaCache(cfg)
    dt = cfg.tgrid.dt
    J = cfg.noise.J
    qw = quad_weights(cfg.xgrid)
    nrm = lambda a: float(np.sqrt(np.sum(a * a * qw)))  # noqa: E731
    un = u.row_norms()

    def clause(name, tuples, fn):
        ratios = []
        for tup in tuples:
            for j in range(1, J + 1):
                lhs, shape = fn(j, *tup)
                ratios.append(float(_safe_ratio(lhs, shape)))
        sup = max(ratios)
        records.append(CheckRecord(name, len(tuples), sup, bool(math.isfinite(sup))).to_dict())

    def zero_clause(name, tuples, fn):
        worst = max(fn(j, *tup) for tup in tuples for j in range(1, J + 1))
        records.append(CheckRecord(name, len(tuples), float(worst), worst == 0.0,
                                   {"max_lhs": float(worst)}).to_dict())

    pairs = _probe_times(rng, N + 1, probes, 2)
    triples = _probe_times(rng, N + 1, probes, 3)
    quads = _probe_times(rng, N + 1, probes, 4)
    d, dp = delta, delta_prime

    # one process, one terminal time
    clause("lemma8_i", pairs, lambda j, s, t: (nrm(z("u", u, j, t, s)), un[s] + 1))
    clause("lemma8_ii", triples, lambda j, r, s, t: (
        nrm(z("u", u, j, t, s) - z("u", u, j, t, r)),
        nrm(u.values[s] - u.values[r])
        + ((t - s) * dt) ** (-d / 2) * ((s - r) * dt) ** (d / 2) * (un[r] + 1)))

    # two terminal times
    def star(tag, f, j, t, s, w):
        return z(tag, f, j, t, w) - z(tag, f, j, s, w)

    clause("lemma9_i", triples, lambda j, w, s, t: (
        nrm(star("u", u, j, t, s, w)),
        ((s - w) * dt) ** (-d / 2) * ((t - s) * dt) ** (d / 2) * (un[w] + 1)))
    clause("lemma9_ii", quads, lambda j, r, w, s, t: (
        nrm(star("u", u, j, t, s, w) - star("u", u, j, t, s, r)),
        ((t - s) * dt) ** (d / 2) * ((s - w) * dt) ** (-d / 2) * nrm(u.values[w] - u.values[r])
        + ((t - s) * dt) ** (dp / 2) * ((s - w) * dt) ** (-dp) * ((w - r) * dt) ** (dp / 2)
        * (un[r] + 1)))

    # Lemmas 9b and 10: two processes
    diff = (u - v).values
    dn = l2_norms(diff, cfg.xgrid)

    def lemma9b_i(tag_v, fv):
        return lambda j, s, t: (nrm(z("u", u, j, t, s) - z(tag_v, fv, j, t, s)), dn[s])

    def lemma9b_ii(j, r, s, t):
        lhs = z("u", u, j, t, s) - z("v", v, j, t, s) - z("u", u, j, t, r) + z("v", v, j, t, r)
        shape = (((t - s) * dt) ** -d * ((s - r) * dt) ** d * dn[r]
                 + nrm(diff[s] - diff[r]))
        return nrm(lhs), shape

    def lemma10_i(j, w, s, t):
        lhs = star("u", u, j, t, s, w) - star("v", v, j, t, s, w)
        return nrm(lhs), ((t - s) * dt) ** (d / 2) * ((s - w) * dt) ** (-d / 2) * dn[w]

    def lemma10_ii(j, r, w, s, t):
        lhs = (star("u", u, j, t, s, w) - star("v", v, j, t, s, w)
               - star("u", u, j, t, s, r) + star("v", v, j, t, s, r))
        shape = (((t - s) * dt) ** (dp / 2) * ((s - w) * dt) ** -dp * ((w - r) * dt) ** (dp / 2)
                 * dn[r]
                 + ((t - s) * dt) ** (d / 2) * ((s - w) * dt) ** (-d / 2) * nrm(diff[w] - diff[r]))
        return nrm(lhs), shape

    clause("lemma9b_i", pairs, lemma9b_i("v", v))
    clause("lemma9b_ii", triples, lemma9b_ii)
    clause("lemma10_i", triples, lemma10_i)
    clause("lemma10_ii", quads, lemma10_ii)

    # identical processes: every difference vanishes exactly
    zero_clause("lemma9b_i_identical", pairs,
                lambda j, s, t: nrm(z("u", u, j, t, s) - z("u2", u, j, t, s)))
    zero_clause("lemma10_ii_identical", quads, lambda j, r, w, s, t: nrm(
        star("u", u, j, t, s, w) - star("u2", u, j, t, s, w)
        - star("u", u, j, t, s, r) + star("u2", u, j, t, s, r)))

    # a-priori bounds for A
    op = MildOperator(cfg, ensemble)
    xi = ensemble.xi(cfg.sigma)
    Au = op.apply(u)
    num = norm_sigma_2_profile(Au, cfg.sigma) ** 2
    den = xi ** 2 * (norm_sigma_2_profile(u, cfg.sigma) ** 2 + 1)
    sup = float(np.max(_safe_ratio(num[1:], den[1:])))
    records.append(CheckRecord("prop11", N, sup, bool(math.isfinite(sup))).to_dict())
    records.append(contraction_check(u, v, ensemble, cfg, op).to_dict())
    return records
