"""Riemann-Liouville operators, the generalized Stieltjes integral and the
space-time sigma-norms, on uniform grids.

All singular kernels are integrated exactly against the piecewise-linear
interpolant of the grid values.  On ``n + 1`` nodes every operator is an
``(n+1) x (n+1)`` lower-triangular matrix whose leading blocks are the
matrices of the sub-intervals ``[a, x_i]``; the solver reuses them that way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from .core import SpaceTimeField, TimeGrid, quad_weights
from .fbm import _abs_power_integral, holder_seminorm


def check_order(sigma: float) -> float:
    sigma = float(sigma)
    if not 0 < sigma < 1:
        raise ValueError(f"fractional order must lie in (0, 1), got {sigma}")
    return sigma


@dataclass(frozen=True)
class GridFunction:
    """Values of a function on the uniform grid of ``len(values)`` nodes on ``[a, b]``.

    ``singular_end='left'`` marks operator outputs whose value at ``a`` is a
    limit that may be infinite; every other value must be finite.
    """

    a: float
    b: float
    values: np.ndarray
    singular_end: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("a grid function needs at least 2 nodes")
        if not self.b > self.a:
            raise ValueError("need a < b")
        inner = v[1:] if self.singular_end == "left" else v
        if not np.all(np.isfinite(inner)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fun, a: float, b: float, n: int) -> "GridFunction":
        x = np.linspace(a, b, n + 1)
        return cls(a, b, np.broadcast_to(fun(x), x.shape).astype(float))

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n + 1)

    def same_grid(self, other: "GridFunction") -> bool:
        return (self.a, self.b, self.n) == (other.a, other.b, other.n)


# -- operator matrices --------------------------------------------------------

@lru_cache(maxsize=32)
def _deriv_matrix_cached(n: int, h: float, s: float) -> np.ndarray:
    i = np.arange(n + 1)[:, None]
    m = np.arange(n + 1)[None, :]

    def A(p):
        # int_{ph}^{(p+1)h} w^{-1-s} dw for p > 0
        p = np.asarray(p, float)
        safe = np.where(p > 0, p, 1.0)
        return np.where(p > 0, h ** -s * (safe ** -s - (p + 1) ** -s) / s, 0.0)

    def B(p):
        # int_{ph}^{(p+1)h} w^{-s} dw
        p = np.asarray(p, float)
        return h ** (1 - s) * ((p + 1) ** (1 - s) - p ** (1 - s)) / (1 - s)

    D = np.zeros((n + 1, n + 1))
    # panel [x_m, x_{m+1}] seen from x_i, w = x_i - y in [p h, (p+1) h]
    p1 = i - 1 - m
    q1 = np.maximum(p1, 0)
    D += np.where(p1 >= 0, q1 * A(q1) - B(q1) / h, 0.0)
    p2 = i - m
    q2 = np.maximum(p2, 0)
    D += np.where((p2 >= 0) & (m >= 1), -(q2 + 1) * A(q2) + B(q2) / h, 0.0)
    ii = np.arange(1, n + 1)
    # phi(x_i) times the total weight of the non-singular panels
    D[ii, ii] += h ** -s * (1 - ii.astype(float) ** -s) / s
    D *= s
    D[ii, ii] += (ii * h) ** -s
    D[0, :] = 0.0
    D /= gamma(1 - s)
    D.setflags(write=False)
    return D


def deriv_matrix(n: int, h: float, sigma: float) -> np.ndarray:
    """Matrix of the left derivative ``D^sigma_{a+}`` on ``n + 1`` nodes of step ``h``.

    Row 0 (the endpoint ``a``) is zero; :func:`rl_deriv_left` patches in the
    endpoint limit.
    """
    return _deriv_matrix_cached(int(n), float(h), check_order(sigma))


@lru_cache(maxsize=32)
def _integral_matrix_cached(n: int, h: float, s: float) -> np.ndarray:
    i = np.arange(n + 1)[:, None]
    k = np.arange(n + 1)[None, :]
    d = np.maximum(i - k, 0).astype(float)
    a = np.where(k == 0, np.maximum(i - 1, 0) ** (s + 1) - (i - 1 - s) * i ** s, 0.0)
    mid = (d + 1) ** (s + 1) + np.abs(d - 1) ** (s + 1) - 2 * d ** (s + 1)
    a = np.where((k >= 1) & (k < i), mid, a)
    a = np.where((k == i) & (i >= 1), 1.0, a)
    a[0, :] = 0.0
    out = a * h ** s / gamma(s + 2)
    out.setflags(write=False)
    return out


def integral_matrix(n: int, h: float, sigma: float) -> np.ndarray:
    """Product-trapezoid weights of the left integral ``I^sigma_{a+}``."""
    return _integral_matrix_cached(int(n), float(h), check_order(sigma))


def _trapezoid(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


# -- public operators -----------------------------------------------------------

def rl_integral_left(phi: GridFunction, sigma: float) -> GridFunction:
    """``I^sigma_{a+} phi(x) = Gamma(sigma)^-1 int_a^x (x-y)^(sigma-1) phi(y) dy``."""
    vals = integral_matrix(phi.n, phi.h, sigma) @ phi.values
    return GridFunction(phi.a, phi.b, vals)


def rl_deriv_left(phi: GridFunction, sigma: float) -> GridFunction:
    """Left derivative in the Marchaud-type form

        Gamma(1-sigma)^-1 [phi(x)(x-a)^-sigma + sigma int_a^x (phi(x)-phi(y))(x-y)^(-1-sigma) dy].

    At ``x = a`` the value is the limit: ``+-inf`` if ``phi(a) != 0``, else 0.
    """
    vals = deriv_matrix(phi.n, phi.h, sigma) @ phi.values
    vals[0] = 0.0 if phi.values[0] == 0 else math.copysign(math.inf, phi.values[0])
    return GridFunction(phi.a, phi.b, vals, singular_end="left")


def _right_compensated(values, h: float, order: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    n = len(v) - 1
    g = (v[-1] - v)[::-1]
    out = deriv_matrix(n, h, order) @ g
    return out[::-1]


def rl_deriv_right_compensated(psi: GridFunction, order: float) -> GridFunction:
    """Right derivative of order ``order`` of ``psi_{b-}(x) = psi(b) - psi(x)``.

    Computed by mirroring ``x -> a + b - x`` onto a left derivative.  The
    value at ``b`` is its limit 0.
    """
    return GridFunction(psi.a, psi.b, _right_compensated(psi.values, psi.h, order))


def gls_functional(psi_values, h: float, sigma: float) -> np.ndarray:
    """Vector ``c`` with ``gls_integral(phi, psi, sigma) = c @ phi.values``.

    The constant part ``phi(a)`` integrates to ``phi(a) (psi(b) - psi(a))``
    exactly.  The remainder ``phi - phi(a)`` vanishes at ``a`` and its
    product with the right derivative vanishes at ``b``, so the trapezoid
    rule applies to it without endpoint corrections.
    """
    sigma = check_order(sigma)
    v = np.asarray(psi_values, dtype=float)
    n = len(v) - 1
    W = _right_compensated(v, h, 1 - sigma)
    D = deriv_matrix(n, h, sigma)
    tw = _trapezoid(n, h) * W
    c = D.T @ tw
    c[0] += (v[-1] - v[0]) - D.sum(axis=1) @ tw
    return c


def gls_integral(phi: GridFunction, psi: GridFunction, sigma: float) -> float:
    """Generalized Stieltjes integral ``int_a^b D^sigma_{a+}phi D^{1-sigma}_{b-}psi_{b-} dx``."""
    if not phi.same_grid(psi):
        raise ValueError("phi and psi live on different grids")
    return float(gls_functional(psi.values, phi.h, sigma) @ phi.values)


def lag_singular_integral(d, h: float, sigma: float) -> float:
    """``int_0^{kh} |d(w)| w^(-1-sigma) dw`` for ``d`` piecewise linear with ``d[0] = 0``.

    ``d[k]`` is the value at lag ``w = k h``.
    """
    d = np.asarray(d, dtype=float)
    k = len(d) - 1
    if k == 0:
        return 0.0
    total = abs(d[1]) * h ** -sigma / (1 - sigma)
    if k > 1:
        w = np.arange(1, k) * h
        total += np.sum(_abs_power_integral(d[1:-1], d[2:], w, w + h, -1 - sigma))
    return float(total)


def _increment_integrals(values, h: float, sigma: float) -> np.ndarray:
    """``int_a^{x_i} |phi(x_i) - phi(y)| (x_i - y)^(-1-sigma) dy`` for every node."""
    v = np.asarray(values, dtype=float)
    return np.array([lag_singular_integral(v[i] - v[i::-1], h, sigma) for i in range(len(v))])


def gls_constant(sigma: float) -> float:
    """Constant ``1 / (Gamma(sigma) Gamma(1-sigma))`` used in :func:`gls_bound_rhs`."""
    sigma = check_order(sigma)
    return 1.0 / (gamma(sigma) * gamma(1 - sigma))


def gls_bound_rhs(phi: GridFunction, psi: GridFunction, sigma: float) -> float:
    """``C ||psi||_{sigma,0,b} int (|phi|(x-a)^-sigma + int |phi(x)-phi(y)|(x-y)^(-1-sigma) dy) dx``."""
    if not phi.same_grid(psi):
        raise ValueError("phi and psi live on different grids")
    sigma = check_order(sigma)
    h = phi.h
    n = phi.n
    v = phi.values
    w = np.arange(n) * h
    first = float(np.sum(_abs_power_integral(v[:-1], v[1:], w, w + h, -sigma)))
    second = float(_trapezoid(n, h) @ _increment_integrals(v, h, sigma))
    semi = holder_seminorm(psi.values, sigma, TimeGrid(phi.b - phi.a, n))
    return gls_constant(sigma) * semi * (first + second)


# -- sigma-norms of space-time fields ---------------------------------------------

def _row_distances(u: SpaceTimeField, i: int) -> np.ndarray:
    diff = u.values[: i + 1] - u.values[i]
    return np.sqrt(np.sum(diff * diff * quad_weights(u.xgrid), axis=1))


def inner_singular_integrals(u: SpaceTimeField, sigma: float, upto: int) -> np.ndarray:
    """``int_0^{t_i} ||u(t_i) - u(v)||_2 (t_i - v)^(-sigma-1) dv`` for ``i = 0..upto``.

    Exact for ``v -> ||u(t_i) - u(v)||_2`` piecewise linear between nodes.
    """
    h = u.tgrid.dt
    return np.array([lag_singular_integral(_row_distances(u, i)[::-1], h, sigma)
                     for i in range(upto + 1)])


def norm_sigma_1(u: SpaceTimeField, sigma: float, t: float) -> float:
    """``(int_0^t (int_0^s ||u(s)-u(v)||_2 (s-v)^(-sigma-1) dv)^2 ds)^(1/2)``."""
    sigma = check_order(sigma)
    i = u.tgrid.index_of(t)
    if i == 0:
        return 0.0
    inner = inner_singular_integrals(u, sigma, i)
    return float(math.sqrt(_trapezoid(i, u.tgrid.dt) @ inner ** 2))


def norm_sigma_2(u: SpaceTimeField, sigma: float, t: float) -> float:
    """``(sup_{s<=t} ||u(s)||_2^2 + norm_sigma_1(u)^2)^(1/2)``."""
    i = u.tgrid.index_of(t)
    sup = float(np.max(u.row_norms()[: i + 1] ** 2))
    return math.sqrt(sup + norm_sigma_1(u, sigma, t) ** 2)


def norm_sigma_2_profile(u: SpaceTimeField, sigma: float) -> np.ndarray:
    """``norm_sigma_2(u, sigma, t_i)`` for every grid time at the cost of one evaluation."""
    sigma = check_order(sigma)
    N = u.tgrid.N
    h = u.tgrid.dt
    inner2 = inner_singular_integrals(u, sigma, N) ** 2
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (inner2[1:] + inner2[:-1]))])
    sup = np.maximum.accumulate(u.row_norms() ** 2)
    return np.sqrt(sup + cum)


# -- self-test ----------------------------------------------------------------------

def selftest(n: int = 1000) -> dict:
    """Run the analytic identities of this module; returns a JSON-able report."""
    checks = []

    def record(name, err, tol):
        checks.append({"name": name, "error": float(err), "tol": tol, "passed": bool(err <= tol)})

    x = np.linspace(0.0, 1.0, n + 1)
    one = GridFunction(0.0, 1.0, np.ones(n + 1))
    ident = GridFunction(0.0, 1.0, x)
    record("integral_power_rule",
           np.max(np.abs(rl_integral_left(one, 0.5).values - x ** 0.5 / gamma(1.5))), 1e-6)
    record("derivative_power_rule",
           np.max(np.abs(rl_deriv_left(ident, 0.5).values - x ** 0.5 / gamma(1.5))), 1e-6)
    record("right_derivative_power_rule",
           np.max(np.abs(rl_deriv_right_compensated(ident, 0.5).values
                         - (1 - x) ** 0.5 / gamma(1.5))), 1e-6)
    m = 2 * n
    xf = np.linspace(0.0, 1.0, m + 1)
    onef = GridFunction(0.0, 1.0, np.ones(m + 1))
    for sigma in (0.2, 0.3, 0.4):
        val = gls_integral(onef, GridFunction(0.0, 1.0, xf ** 2), sigma)
        record(f"gls_constant_integrand_sigma{sigma:g}", abs(val - 1.0), 1e-4)
        # int (1 + x) d(x^2) = 5/3
        val = gls_integral(GridFunction(0.0, 1.0, 1 + xf), GridFunction(0.0, 1.0, xf ** 2), sigma)
        record(f"gls_riemann_stieltjes_sigma{sigma:g}", abs(val - 5 / 3), 1e-4)
    vals = [gls_integral(GridFunction(0.0, 1.0, 1 + xf), GridFunction(0.0, 1.0, xf ** 3), s)
            for s in (0.2, 0.3, 0.4)]
    record("gls_sigma_independence", max(vals) - min(vals), 1e-3)
    phi = GridFunction(0.0, 1.0, np.sin(np.pi * x) + x)
    for sigma in (0.3, 0.5):
        back = rl_deriv_left(rl_integral_left(phi, sigma), sigma).values
        record(f"derivative_inverts_integral_sigma{sigma:g}",
               np.max(np.abs(back - phi.values)), 1e-3)
    semi = rl_integral_left(rl_integral_left(phi, 0.2), 0.3).values
    record("integral_semigroup", np.max(np.abs(semi - rl_integral_left(phi, 0.5).values)), 1e-4)
    return {"n": n, "checks": checks, "passed": all(c["passed"] for c in checks)}
