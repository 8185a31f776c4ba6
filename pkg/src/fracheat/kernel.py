"""Fundamental solution of the two-medium heat operator and its bound checks.

The operator is ``(1/(2 rho)) d/dx (rho A d/dx)`` with ``A`` and ``rho``
piecewise constant across ``x = 0``.  Its fundamental solution is a skew
Gaussian kernel in the warped coordinate ``f(x) = x / sqrt(A(x))``:

    G(t, x, y) = c(y) / sqrt(2 pi t) * [ exp(-(f(x) - f(y))^2 / (2t))
                 + beta sign(y) exp(-(|f(x)| + |f(y)|)^2 / (2t)) ],

with ``c(y) = 1/sqrt(a1)`` for ``y <= 0`` and ``1/sqrt(a2)`` otherwise.

Everything here is vectorised over the space arguments.  The ``*_check``
functions return :class:`~fracheat.core.CheckRecord` diagnostics: empirical
sup-ratios of a quadrature left-hand side against the shape of a bound, never
a recovered constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .core import CheckRecord, SpaceGrid

SQRT_2PI = math.sqrt(2 * math.pi)


class QuadratureError(RuntimeError):
    """Raised when an adaptive z-integral does not reach its tolerance."""


def derive_alpha_beta(a1: float, a2: float, rho1: float, rho2: float) -> tuple[float, float]:
    """Return ``(alpha, beta)`` for the medium ``(a1, a2, rho1, rho2)``."""
    for name, v in (("a1", a1), ("a2", a2), ("rho1", rho1), ("rho2", rho2)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    alpha = 1.0 - rho1 * a1 / (rho2 * a2)
    # (sqrt(a1) + sqrt(a2)(alpha-1)) / (sqrt(a1) - sqrt(a2)(alpha-1)) with the
    # factor sqrt(a1) / (rho2 sqrt(a2)) cancelled; avoids rounding alpha - 1
    right = rho2 * math.sqrt(a2)
    left = rho1 * math.sqrt(a1)
    return alpha, (right - left) / (right + left)


@dataclass(frozen=True)
class MediumParams:
    """Diffusivities ``a1, a2`` and densities ``rho1, rho2`` left/right of 0."""

    a1: float
    a2: float
    rho1: float
    rho2: float
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        alpha, beta = derive_alpha_beta(self.a1, self.a2, self.rho1, self.rho2)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def homogeneous(cls) -> "MediumParams":
        return cls(1.0, 1.0, 1.0, 1.0)

    @property
    def a_max(self) -> float:
        return max(self.a1, self.a2)

    def A(self, x):
        return np.where(np.asarray(x) <= 0, self.a1, self.a2)

    def rho(self, x):
        return np.where(np.asarray(x) <= 0, self.rho1, self.rho2)

    def as_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "rho1": self.rho1, "rho2": self.rho2}


def f_map(x, p: MediumParams):
    """Warped coordinate ``x / sqrt(a1)`` for ``x <= 0``, ``x / sqrt(a2)`` otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, x / math.sqrt(p.a1), x / math.sqrt(p.a2))
    return float(out) if out.ndim == 0 else out


def f_inverse(w, p: MediumParams):
    w = np.asarray(w, dtype=float)
    out = np.where(w <= 0, w * math.sqrt(p.a1), w * math.sqrt(p.a2))
    return float(out) if out.ndim == 0 else out


def lemma1_constant(p: MediumParams) -> float:
    """``(1 + |beta|) / sqrt(2 pi) * (1/sqrt(a1) + 1/sqrt(a2))``."""
    return (1 + abs(p.beta)) / SQRT_2PI * (1 / math.sqrt(p.a1) + 1 / math.sqrt(p.a2))


def mass_constant(p: MediumParams) -> float:
    """``(1/sqrt(a1) + 1/sqrt(a2)) (1 + |beta|) max(sqrt(a1), sqrt(a2))``."""
    return ((1 / math.sqrt(p.a1) + 1 / math.sqrt(p.a2)) * (1 + abs(p.beta))
            * max(math.sqrt(p.a1), math.sqrt(p.a2)))


def _side_sign(y):
    # y = 0 belongs to the left medium, consistently with c(0) = 1/sqrt(a1)
    return np.where(np.asarray(y) <= 0, -1.0, 1.0)


def _parts(x, y, p: MediumParams):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx, fy = f_map(x, p), f_map(y, p)
    c = np.where(y <= 0, 1 / math.sqrt(p.a1), 1 / math.sqrt(p.a2))
    r1 = (np.asarray(fx) - fy) ** 2
    r2 = (np.abs(fx) + np.abs(fy)) ** 2
    return c, p.beta * _side_sign(y), r1, r2


def _check_dt(dt):
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("time lag must be positive")
    return dt


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def G_eval(dt, x, y, p: MediumParams):
    """Fundamental solution ``G(dt, x, y)`` for ``dt > 0``."""
    dt = _check_dt(dt)
    c, bs, r1, r2 = _parts(x, y, p)
    val = c / np.sqrt(2 * np.pi * dt) * (np.exp(-r1 / (2 * dt)) + bs * np.exp(-r2 / (2 * dt)))
    return _out(val)


def _gauss_dt(dt, r):
    # d/dt [ t^-1/2 exp(-r / 2t) ]
    return dt ** -0.5 * np.exp(-r / (2 * dt)) * (-0.5 / dt + r / (2 * dt ** 2))


def _gauss_dt2(dt, r):
    # d^2/dt^2 [ t^-1/2 exp(-r / 2t) ] with a = r/2
    a = r / 2
    return np.exp(-a / dt) * (0.75 * dt ** -2.5 - 3 * a * dt ** -3.5 + a ** 2 * dt ** -4.5)


def G_dt(dt, x, y, p: MediumParams):
    """Analytic ``d/dt G(t, x, y)`` at ``t = dt``."""
    dt = _check_dt(dt)
    c, bs, r1, r2 = _parts(x, y, p)
    return _out(c / SQRT_2PI * (_gauss_dt(dt, r1) + bs * _gauss_dt(dt, r2)))


def G_lag2(lag, x, y, p: MediumParams):
    """Second derivative of ``u -> G(u, x, y)``.

    This is the mixed derivative ``d^2/(dt ds) G(t - s, x, y)`` up to sign:
    since ``d/ds = -d/du``, the true mixed derivative is ``-G_lag2``.
    """
    lag = _check_dt(lag)
    c, bs, r1, r2 = _parts(x, y, p)
    return _out(c / SQRT_2PI * (_gauss_dt2(lag, r1) + bs * _gauss_dt2(lag, r2)))


def G_dtds(t, s, z, y, p: MediumParams):
    """Mixed derivative ``d^2/(dt ds)`` of ``(t, s) -> G(t - s, z, y)``.

    Equals ``-G_lag2(t - s, z, y)``; the bounds only involve its absolute
    value, which :func:`G_lag2` also provides.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s >= t):
        raise ValueError("mixed derivative needs s < t")
    return _out(-np.asarray(G_lag2(t - s, z, y, p)))


def G_dx_onesided(dt, x, y, p: MediumParams, side: int):
    """One-sided analytic ``d/dx G(dt, x, y)``; ``side=-1`` uses the left branch.

    At ``x = 0`` this gives the limits from ``0-`` and ``0+``.
    """
    dt = float(dt)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = p.a1 if side < 0 else p.a2
    fx = x / math.sqrt(a)
    sgn_fx = np.where(x == 0, float(side), np.sign(x))
    fy = f_map(y, p)
    c = np.where(y <= 0, 1 / math.sqrt(p.a1), 1 / math.sqrt(p.a2))
    e1 = np.exp(-(fx - fy) ** 2 / (2 * dt))
    s2 = np.abs(fx) + np.abs(fy)
    e2 = np.exp(-s2 ** 2 / (2 * dt))
    dG_dfx = c / np.sqrt(2 * np.pi * dt) * (
        -(fx - fy) / dt * e1 - p.beta * _side_sign(y) * s2 / dt * sgn_fx * e2)
    return _out(dG_dfx / math.sqrt(a))


# -- z-integrals ------------------------------------------------------------

def line_integral(fun, centers, width: float, reach: float | None = None,
                  epsabs: float = 1e-12, epsrel: float = 1e-10) -> float:
    """Integrate ``fun`` over the real line.

    The line is cut at 0, at each centre and at a few multiples of ``width``
    around it, and truncated ``reach`` (default ``40 width``) beyond the
    outermost centre; each piece goes to adaptive Gauss-Kronrod.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    reach = 40 * width if reach is None else reach
    lo = min(centers.min(), 0.0) - reach
    hi = max(centers.max(), 0.0) + reach
    cuts = {0.0, lo, hi}
    for c in centers:
        for k in (0.0, 1.0, 3.0, 8.0):
            cuts.update((c - k * width, c + k * width))
    cuts = np.array(sorted(v for v in cuts if lo <= v <= hi))
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            continue
        val, err, *rest = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=epsrel,
                                         limit=200, full_output=1)
        if err > max(1e-8, 1e-6 * abs(val)):
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge (err={err:.2e})")
        total += val
    return total


def _cuts(centers, width: float, reach: float | None = None, extra=()) -> np.ndarray:
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    reach = 40 * width if reach is None else reach
    lo = min(centers.min(), 0.0) - reach
    hi = max(centers.max(), 0.0) + reach
    offs = np.array([0.0, 1.0, 3.0, 8.0]) * width
    pts = np.concatenate([[lo, 0.0, hi], (centers[:, None] + offs).ravel(),
                          (centers[:, None] - offs).ravel(), np.ravel(extra)])
    pts = np.unique(np.clip(pts, lo, hi))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * width])
    return pts[keep]


def _composite_rule(cuts, panels: int, order: int = 10):
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([np.linspace(a, b, panels + 1)[:-1] for a, b in zip(cuts[:-1], cuts[1:])]
                           + [cuts[-1:]])
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * xg).ravel(), (half * wg).ravel()


def line_integral_vec(fun, centers, width: float, reach: float | None = None,
                      rtol: float = 1e-7, atol: float = 1e-12, max_level: int = 9,
                      extra_cuts=()):
    """Vectorised counterpart of :func:`line_integral`.

    ``fun(z)`` maps a 1-d array of abscissae to an array whose first axis is
    ``z`` (further axes, e.g. probes, are integrated independently).  Each
    piece between cuts gets a composite 10-point Gauss-Legendre rule whose
    panel count doubles until two successive levels agree to ``rtol``.
    Non-smooth points of the integrand other than ``0`` and the centres
    must be passed as ``extra_cuts``.
    """
    cuts = _cuts(centers, width, reach, extra_cuts)
    prev = None
    for level in range(max_level):
        z, w = _composite_rule(cuts, 2 ** (level + 1))
        vals = np.tensordot(w, fun(z), axes=(0, 0))
        if prev is not None and np.all(np.abs(vals - prev) <= atol + rtol * np.abs(vals)):
            return vals
        prev = vals
    raise QuadratureError("composite Gauss-Legendre refinement did not converge")


def _sign_change_roots(signed, centers, width: float, iters: int = 60) -> np.ndarray:
    """Zeros in ``z`` of ``signed(z)`` (shape ``(nz, probes)``), located by bisection."""
    z, _ = _composite_rule(_cuts(centers, width), 8)
    vals = signed(z)
    iz, ip = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if iz.size == 0:
        return np.empty(0)
    lo, hi = z[iz], z[iz + 1]
    flo = vals[iz, ip]
    cols = np.arange(iz.size)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = signed(mid)[cols, ip]
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _width(dt, p):
    return math.sqrt(dt * p.a_max)


def mass_integrals(dt: float, point: float, p: MediumParams) -> tuple[float, float]:
    """``(int |G(dt, z, point)| dz, int |G(dt, point, z)| dz)``."""
    w = _width(dt, p)
    first = line_integral(lambda z: abs(G_eval(dt, z, point, p)), [point], w)
    second = line_integral(lambda z: abs(G_eval(dt, point, z, p)), [point], w)
    return first, second


def lemma1_check(p: MediumParams, n_probes: int = 10_000, seed: int = 0,
                 T: float = 1.0, span: float = 4.0) -> CheckRecord:
    """Pointwise ``|G| <= C dt^-1/2 exp(-(f(x)-f(y))^2 / 2dt)`` with the explicit ``C``."""
    rng = np.random.default_rng(seed)
    dt = T * rng.uniform(1e-3, 1.0, n_probes)
    x = rng.uniform(-span, span, n_probes)
    y = rng.uniform(-span, span, n_probes)
    # compare logarithms: G = c/sqrt(2 pi dt) exp(-r1/2dt) [1 + b exp(-(r2-r1)/2dt)]
    # so far-apart probes do not underflow to 0/0
    c, bs, r1, r2 = _parts(x, y, p)
    log_lhs = (np.log(c / np.sqrt(2 * np.pi * dt)) - r1 / (2 * dt)
               + np.log(np.abs(1 + bs * np.exp(-(r2 - r1) / (2 * dt)))))
    log_env = math.log(lemma1_constant(p)) - 0.5 * np.log(dt) - r1 / (2 * dt)
    ratio = np.exp(log_lhs - log_env)
    sup = float(ratio.max())
    return CheckRecord("lemma1", n_probes, sup, bool(sup <= 1 + 1e-12),
                       {"constant": lemma1_constant(p)})


def mass_bound_check(dt: float, probes, p: MediumParams, tol: float = 1e-6) -> CheckRecord:
    """Largest quadrature mass ``int |G| dz`` over probes against the explicit constant."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    masses = [max(mass_integrals(dt, float(q), p)) for q in np.atleast_1d(probes)]
    c1 = mass_constant(p)
    sup = max(masses)
    return CheckRecord("cor2", len(masses), sup / c1, bool(sup <= c1 + tol),
                       {"max_mass": sup, "constant": c1, "dt": dt})


def _similarity_probes(scale: float, p: MediumParams, n: int = 11, zmax: float = 2.5):
    return f_inverse(np.linspace(-zmax, zmax, n) * math.sqrt(scale), p)


def _both_slots(kern, probes, width, eta: float = 1.0):
    """Per probe, ``max`` of ``int |kern(z, q)|^eta dz`` and ``int |kern(q, z)|^eta dz``.

    For ``eta < 1`` the integrand has infinite slope at the zeros of
    ``kern``, so those are located first and used as panel cuts.
    """
    q = np.atleast_1d(np.asarray(probes, dtype=float))
    out = []
    for signed in (lambda z: kern(z[:, None], q[None, :]), lambda z: kern(q[None, :], z[:, None])):
        roots = _sign_change_roots(signed, q, width) if eta < 1 else ()
        out.append(line_integral_vec(lambda z: np.abs(signed(z)) ** eta, q, width,
                                     extra_cuts=roots))
    return np.maximum(*out)


def eta_integral(order: int, lag: float, probes, eta: float, p: MediumParams) -> np.ndarray:
    """``max`` of ``int |d^order/d lag^order G|^eta dz`` over both slots, per probe."""
    deriv = {1: G_dt, 2: G_lag2}[order]
    return _both_slots(lambda a, b: deriv(lag, a, b, p), probes, _width(lag, p), eta)


def derivative_integral_check(order: int, eta: float, lags, p: MediumParams,
                              n_probes: int = 11, slope_tol: float = 0.1) -> CheckRecord:
    """Log-log slope of ``sup_probes int |d^k G|^eta dz`` against the lag.

    ``order=1`` uses ``d/dt G`` (expected slope ``-3 eta/2 + 1/2``);
    ``order=2`` the mixed derivative (expected ``-5 eta/2 + 1/2``).  Probes
    sit at fixed similarity coordinates ``f(y)/sqrt(lag)``, so the sup over
    probes approximates the sup over all of ``R`` at every lag.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    lags = np.asarray(lags, dtype=float)
    expected = (-1.5 if order == 1 else -2.5) * eta + 0.5
    sups = np.array([eta_integral(order, lag, _similarity_probes(lag, p, n_probes), eta, p).max()
                     for lag in lags])
    slope = float(np.polyfit(np.log(lags), np.log(sups), 1)[0])
    ratios = sups / lags ** expected
    name = "lemma3_i" if order == 1 else "lemma3_ii"
    return CheckRecord(
        f"{name}_eta{eta:g}", len(lags) * n_probes * 2, float(ratios.max()),
        bool(np.all(np.isfinite(ratios)) and abs(slope - expected) <= slope_tol),
        {"slope": slope, "expected_slope": expected, "lags": lags.tolist(),
         "sup_integrals": sups.tolist(), "ratio_spread": float(ratios.max() / ratios.min())})


def time_holder_check(t: float, s: float, probes, delta: float, p: MediumParams) -> CheckRecord:
    """``int |G(t, ., y) - G(s, ., y)| dz`` over probes relative to ``s^-delta (t-s)^delta``."""
    if not 1 / 3 < delta < 1:
        raise ValueError(f"delta={delta} outside (1/3, 1)")
    if not 0 < s <= t:
        raise ValueError("need 0 < s <= t")
    kern = lambda a, b: G_eval(t, a, b, p) - G_eval(s, a, b, p)  # noqa: E731
    lhs = float(_both_slots(kern, probes, _width(s, p)).max())
    shape = s ** -delta * (t - s) ** delta
    ratio = lhs / shape if shape > 0 else (0.0 if lhs == 0 else math.inf)
    return CheckRecord("cor4", len(np.atleast_1d(probes)), ratio, bool(np.isfinite(ratio)),
                       {"t": t, "s": s, "lhs": lhs})


def double_increment_check(r1: float, r2: float, r3: float, r4: float, delta: float,
                           p: MediumParams, probes=None) -> CheckRecord:
    """Second time difference of ``G`` against ``(r4-r3)^d (r3-r2)^-2d (r2-r1)^d``.

    Times are ordered ``0 < r1 <= r2 < r3 <= r4``; the integrand is
    ``G(r4-r2) - G(r3-r2) - G(r4-r1) + G(r3-r1)``, integrated over the first
    slot.  Equal outer pairs give the degenerate zero case.
    """
    if not 1 / 5 < delta < 1:
        raise ValueError(f"delta={delta} outside (1/5, 1)")
    if not 0 < r1 <= r2 < r3 <= r4:
        raise ValueError("need 0 < r1 <= r2 < r3 <= r4")
    if probes is None:
        probes = _similarity_probes(r3 - r2, p)

    def kern(a, b):
        # grouped so that r1 = r2 or r3 = r4 cancel exactly
        return ((G_eval(r4 - r2, a, b, p) - G_eval(r4 - r1, a, b, p))
                - (G_eval(r3 - r2, a, b, p) - G_eval(r3 - r1, a, b, p)))

    q = np.atleast_1d(np.asarray(probes, dtype=float))
    lhs = float(line_integral_vec(lambda z: np.abs(kern(z[:, None], q[None, :])), q,
                                  _width(r3 - r2, p)).max())
    shape = (r4 - r3) ** delta * (r3 - r2) ** (-2 * delta) * (r2 - r1) ** delta
    ratio = lhs / shape if shape > 0 else (0.0 if lhs == 0 else math.inf)
    return CheckRecord("lemma6", len(q), ratio, bool(np.isfinite(ratio)),
                       {"times": [r1, r2, r3, r4], "lhs": lhs})


def sweep_spread(records, name: str, max_spread: float = 10.0) -> CheckRecord:
    """Fold per-scale records into one: finite ratios with max/min spread bounded."""
    ratios = np.array([r.sup_ratio for r in records])
    finite = bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0))
    spread = float(ratios.max() / ratios.min()) if finite else math.inf
    return CheckRecord(name, sum(r.probe_count for r in records), float(ratios.max()),
                       finite and spread <= max_spread,
                       {"spread": spread, "ratios": ratios.tolist()})


def time_holder_sweep(p: MediumParams, delta: float = 0.5, scales=None,
                      shapes=(1.5, 2.0, 4.0)) -> CheckRecord:
    """:func:`time_holder_check` over pairs ``(c, c r)``, ``c`` across one decade."""
    scales = np.geomspace(0.02, 0.2, 4) if scales is None else scales
    recs = [time_holder_check(c * r, c, _similarity_probes(c, p), delta, p)
            for c in scales for r in shapes]
    return sweep_spread(recs, "cor4")


def double_increment_sweep(p: MediumParams, delta: float = 0.4, scales=None,
                           shapes=((1, 2, 4, 8), (1, 1.5, 3, 3.5), (1, 3, 4, 6))) -> CheckRecord:
    """:func:`double_increment_check` on scaled time quadruples across one decade."""
    scales = np.geomspace(0.01, 0.1, 4) if scales is None else scales
    recs = [double_increment_check(*(c * np.array(sh)), delta, p)
            for c in scales for sh in shapes]
    return sweep_spread(recs, "lemma6")


# -- derived identities -------------------------------------------------------

def pde_residual(t: float, x, y, p: MediumParams, h: float):
    """``|d/dt G - (A(x)/2) d^2/dx^2 G|`` with a central second difference in ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) < 2 * h):
        raise ValueError("probe too close to the interface at 0")
    if not t > 0:
        raise ValueError("t must be positive")
    gxx = (G_eval(t, x + h, y, p) - 2 * G_eval(t, x, y, p) + G_eval(t, x - h, y, p)) / h ** 2
    return _out(np.abs(G_dt(t, x, y, p) - 0.5 * p.A(x) * gxx))


def interface_checks(t: float, y, p: MediumParams) -> tuple[float, float]:
    """Continuity and flux defects of ``x -> G(t, x, y)`` across ``x = 0``.

    Returns ``(|G(0-) - G(0+)|, |rho1 a1 G_x(0-) - rho2 a2 G_x(0+)|)`` using
    the one-sided branches of the closed form.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    y = np.asarray(y, dtype=float)
    c, bs, _, _ = _parts(0.0, y, p)
    fy = f_map(y, p)

    def one_side(a):
        fx = 0.0 / math.sqrt(a)
        return c / np.sqrt(2 * np.pi * t) * (np.exp(-(fx - fy) ** 2 / (2 * t))
                                             + bs * np.exp(-(abs(fx) + np.abs(fy)) ** 2 / (2 * t)))

    cont = np.abs(one_side(p.a1) - one_side(p.a2))
    flux = np.abs(p.rho1 * p.a1 * G_dx_onesided(t, 0.0, y, p, -1)
                  - p.rho2 * p.a2 * G_dx_onesided(t, 0.0, y, p, +1))
    return _out(cont), _out(flux)


def detailed_balance_defect(t: float, x, y, p: MediumParams):
    """``|rho(x) G(t, x, y) - rho(y) G(t, y, x)|``."""
    return _out(np.abs(p.rho(x) * G_eval(t, x, y, p) - p.rho(y) * G_eval(t, y, x, p)))


def _gauss_legendre_line(fun, lo, hi, panels, order=8):
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    z = (mid + half * xg).ravel()
    return float(np.sum(fun(z) * (half * wg).ravel()))


def chapman_kolmogorov_defect(t: float, s: float, x: float, y: float, p: MediumParams,
                              panels: int | None = None) -> float:
    """``|int G(t, x, z) G(s, z, y) dz - G(t + s, x, y)|``.

    ``panels=None`` uses adaptive quadrature; an integer uses a fixed
    composite Gauss-Legendre rule with that many panels on each side of 0.
    """
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    fun = lambda z: G_eval(t, x, z, p) * G_eval(s, z, y, p)  # noqa: E731
    w = math.sqrt(min(t, s) * p.a_max)
    reach = 40 * math.sqrt(max(t, s) * p.a_max)
    if panels is None:
        conv = line_integral(fun, [x, y], w, reach=reach)
    else:
        lo = min(x, y, 0.0) - reach
        hi = max(x, y, 0.0) + reach
        conv = (_gauss_legendre_line(fun, lo, 0.0, panels)
                + _gauss_legendre_line(fun, 0.0, hi, panels))
    return abs(conv - G_eval(t + s, x, y, p))


# -- discretised kernels --------------------------------------------------------

def _gauss_panel_moments(w0, w1, mu, var):
    """``P = int N dw`` and ``Q = int (w - mu) N dw`` over ``[w0, w1]`` for ``N(mu, var)``."""
    sd = np.sqrt(var)
    a = (w0 - mu) / sd
    b = (w1 - mu) / sd
    P = np.where(a > 0, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))
    phi = lambda v: np.exp(-0.5 * v * v) / SQRT_2PI  # noqa: E731
    Q = sd * (phi(a) - phi(b))
    return P, Q


def transfer_matrix(lag: float, grid: SpaceGrid, p: MediumParams) -> np.ndarray:
    """Matrix ``K[k, m] = int_{-L}^{L} G(lag, x_k, y) hat_m(y) dy``.

    ``hat_m`` are the piecewise-linear hat functions of ``grid``, so
    ``K @ g`` is the exact kernel integral of the interpolant of ``g``.  Each
    panel lies on one side of 0, where ``f`` is linear; the integrals
    reduce to Gaussian moments.  ``lag = 0`` returns the identity.
    """
    M = grid.M
    if lag == 0:
        return np.eye(M)
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    y = grid.nodes
    w = f_map(y, p)
    w0, w1 = w[:-1][None, :], w[1:][None, :]
    width = w1 - w0
    right = (y[1:] > 0)[None, :]
    fx = f_map(y, p)[:, None]
    K = np.zeros((M, M))

    def add(mu, weight):
        P, Q = _gauss_panel_moments(w0, w1, mu, lag)
        rise = ((mu - w0) * P + Q) / width      # hat of the right node
        fall = ((w1 - mu) * P - Q) / width      # hat of the left node
        K[:, 1:] += weight * rise
        K[:, :-1] += weight * fall

    add(fx, 1.0)
    # reflected term: right panels centred at -|f(x)|, left panels at +|f(x)|
    mu_ref = np.where(right, -np.abs(fx), np.abs(fx))
    add(mu_ref, p.beta * np.where(right, 1.0, -1.0))
    return K


def transfer_matrices(lags, grid: SpaceGrid, p: MediumParams) -> np.ndarray:
    """Stack of :func:`transfer_matrix` for each lag."""
    return np.stack([transfer_matrix(float(l), grid, p) for l in lags])


def kernel_table(dt: float, xs, ys, p: MediumParams) -> np.ndarray:
    """Rows ``(x, y, G(dt, x, y))`` over the product of ``xs`` and ``ys``."""
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), np.ravel(G_eval(dt, X, Y, p))])
