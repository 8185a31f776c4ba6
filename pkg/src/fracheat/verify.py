"""Bound and identity checks gathered into one report.

Every entry is a JSON-able dict with ``name``, ``probe_count``, ``sup_ratio``,
``passed`` and ``reason``; ``reason`` is set only when the check could not
run (bad probe window, quadrature failure), never when it ran and failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .core import CheckRecord
from .fraccalc import GridFunction, gls_bound_rhs, gls_integral, selftest
from .kernel import MediumParams
from .noise_field import NoiseEnsemble, basis_matrix, ineg_ratio
from .solver import SolverConfig, appendix_bound_suite, smooth_test_field


@dataclass(frozen=True)
class BoundCheckParams:
    """Exponents and probe counts of the bound suite.

    ``delta`` serves the checks whose window is ``(1/3, 1)``, ``delta_prime``
    those with window ``(1/5, 1)``.
    """

    delta: float = 0.5
    delta_prime: float = 0.4
    etas: tuple = (0.5, 1.0)
    lemma1_probes: int = 10_000
    appendix_probes: int = 200
    seed: int = 0


def _guard(name, fn):
    try:
        out = fn()
    except (ValueError, kernel.QuadratureError, ArithmeticError) as exc:
        return [CheckRecord.rejected(name, f"{type(exc).__name__}: {exc}").to_dict()]
    recs = out if isinstance(out, list) else [out]
    return [r.to_dict() if isinstance(r, CheckRecord) else r for r in recs]


# -- kernel gates -------------------------------------------------------------

def pde_order_check(p: MediumParams, n_probes: int = 20, seed: int = 0,
                    steps=(0.04, 0.02, 0.01, 0.005), min_order: float = 1.8) -> CheckRecord:
    """Observed order of the heat-equation residual under halving of the x-step."""
    rng = np.random.default_rng(seed)
    sign = rng.choice([-1.0, 1.0], n_probes)
    x = sign * rng.uniform(0.2, 1.5, n_probes)
    y = rng.uniform(-1.5, 1.5, n_probes)
    t = rng.uniform(0.3, 1.0, n_probes)
    res = np.array([[kernel.pde_residual(ti, xi, yi, p, h) for h in steps]
                    for ti, xi, yi in zip(t, x, y)])
    orders = np.polyfit(np.log(steps), np.log(res).T, 1)[0]
    worst = float(orders.min())
    return CheckRecord("pde_residual_order", n_probes, worst, bool(worst >= min_order),
                       {"min_order": worst, "max_residual": float(res.max())})


def interface_gate(p: MediumParams, ys=None) -> CheckRecord:
    ys = np.linspace(-2.0, 2.0, 9) if ys is None else ys
    defects = [kernel.interface_checks(t, y, p) for t in (0.1, 0.5, 1.0) for y in ys]
    cont = max(d[0] for d in defects)
    flux = max(d[1] for d in defects)
    return CheckRecord("interface", len(defects), float(flux), bool(cont == 0.0 and flux <= 1e-12),
                       {"continuity_defect": float(cont), "flux_defect": float(flux)})


def chapman_kolmogorov_gate(p: MediumParams, tol: float = 1e-4) -> CheckRecord:
    cases = [(0.5, 0.5, 0.2, 0.4), (0.3, 0.2, -0.5, 0.6), (0.25, 0.75, 0.0, -1.0),
             (0.1, 0.4, 1.0, -0.3)]
    worst = max(kernel.chapman_kolmogorov_defect(t, s, x, y, p) for t, s, x, y in cases)
    return CheckRecord("chapman_kolmogorov", len(cases), worst, bool(worst <= tol),
                       {"max_defect": worst})


def detailed_balance_gate(p: MediumParams, n: int = 2000, seed: int = 0,
                          tol: float = 1e-12) -> CheckRecord:
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.05, 1.0, n)
    x = rng.uniform(-3, 3, n)
    y = rng.uniform(-3, 3, n)
    worst = float(np.max(kernel.detailed_balance_defect(t, x, y, p)))
    return CheckRecord("detailed_balance", n, worst, bool(worst <= tol), {"max_defect": worst})


def kernel_suite(p: MediumParams, params: BoundCheckParams = BoundCheckParams()) -> list[dict]:
    """Bounds on ``G`` and its integrals plus the derived identities."""
    out = []
    out += _guard("lemma1", lambda: kernel.lemma1_check(p, params.lemma1_probes, params.seed))
    probes = np.linspace(-2.0, 2.0, 9)
    for dt in (0.5, 0.1, 0.01):
        out += _guard(f"cor2_dt{dt:g}", lambda dt=dt: _named(
            kernel.mass_bound_check(dt, probes * math.sqrt(dt / 0.5), p), f"cor2_dt{dt:g}"))
    lags = np.geomspace(0.1, 1.0, 5)
    for order in (1, 2):
        for eta in params.etas:
            name = f"lemma3_{'i' if order == 1 else 'ii'}_eta{eta:g}"
            out += _guard(name, lambda o=order, e=eta: kernel.derivative_integral_check(
                o, e, lags, p, n_probes=7))
    out += _guard("cor4", lambda: kernel.time_holder_sweep(p, params.delta))
    out += _guard("lemma6", lambda: kernel.double_increment_sweep(p, params.delta_prime))
    out += _guard("pde_residual_order", lambda: pde_order_check(p))
    out += _guard("interface", lambda: interface_gate(p))
    out += _guard("chapman_kolmogorov", lambda: chapman_kolmogorov_gate(p))
    out += _guard("detailed_balance", lambda: detailed_balance_gate(p))
    return out


def _named(rec: CheckRecord, name: str) -> CheckRecord:
    rec.name = name
    return rec


# -- integration bounds -----------------------------------------------------------

def majstie_check(sigmas=(0.2, 0.3, 0.4), n: int = 200, count: int = 10, seed: int = 0) -> CheckRecord:
    """``|gls_integral| / gls_bound_rhs`` on random walks and smooth pairs."""
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n + 1)
    ratios = []
    pairs = [(np.ones_like(x), x), (1 + x, x ** 3), (np.sin(3 * x), np.exp(x))]
    for _ in range(count):
        pairs.append((np.cumsum(rng.normal(size=n + 1)) / math.sqrt(n),
                      np.cumsum(rng.normal(size=n + 1)) / math.sqrt(n)))
    for s in sigmas:
        for a, b in pairs:
            phi, psi = GridFunction(0.0, 1.0, a), GridFunction(0.0, 1.0, b)
            bound = gls_bound_rhs(phi, psi, s)
            ratios.append(abs(gls_integral(phi, psi, s)) / bound)
    sup = float(max(ratios))
    return CheckRecord("majstie", len(ratios), sup, bool(sup <= 1.0))


def ineg_check(cfg: SolverConfig, ensemble: NoiseEnsemble, count: int = 10, seed: int = 0) -> CheckRecord:
    """A-priori bound of the field integral on random smooth integrands."""
    E = basis_matrix(cfg.noise.J, cfg.xgrid)
    ratios = []
    for k in range(count):
        u = smooth_test_field(cfg, seed + 100 + k).values
        F = (1.0 + u)[None, :, :] * E[:, None, :]
        ratios.append(ineg_ratio(F, ensemble, cfg.sigma, cfg.xgrid)["ratio"])
    sup = float(max(ratios))
    return CheckRecord("ineg", count, sup, bool(sup <= 1.0),
                       {"ratio_spread": float(max(ratios) / min(ratios))})


def full_report(cfg: SolverConfig, ensemble: NoiseEnsemble,
                params: BoundCheckParams = BoundCheckParams()) -> list[dict]:
    out = kernel_suite(cfg.medium, params)
    out += _guard("fraccalc_selftest", lambda: _selftest_record())
    out += _guard("majstie", lambda: majstie_check(seed=params.seed))
    out += _guard("ineg", lambda: ineg_check(cfg, ensemble, seed=params.seed))
    out += _guard("appendix", lambda: appendix_bound_suite(
        cfg, ensemble, params.appendix_probes, params.seed, params.delta, params.delta_prime))
    return out


def _selftest_record() -> CheckRecord:
    rep = selftest()
    worst = max(c["error"] / c["tol"] for c in rep["checks"])
    return CheckRecord("fraccalc_selftest", len(rep["checks"]), worst, rep["passed"])


def summarize(records: list[dict]) -> str:
    """``"ok"``, ``"failed"`` (a check ran and failed) or ``"rejected"`` (a check could not run)."""
    if any(r.get("reason") for r in records):
        return "rejected"
    if not all(r["passed"] for r in records):
        return "failed"
    return "ok"
