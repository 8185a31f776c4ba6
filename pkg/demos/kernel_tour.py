"""Tour of the two-medium heat kernel.

Run with ``python3 demos/kernel_tour.py``.  The medium has diffusivity 4 on
the left of 0 and 1 on the right, densities 1 and 2.
"""

import numpy as np

from fracheat import kernel as K
from fracheat.kernel import MediumParams

p = MediumParams(4.0, 1.0, 1.0, 2.0)
print(f"medium {p.as_dict()}: alpha = {p.alpha:.4f}, beta = {p.beta:.4f}")
# beta = (rho2 sqrt(a2) - rho1 sqrt(a1)) / (rho2 sqrt(a2) + rho1 sqrt(a1)) is 0 here:
# the fluxes balance and no reflected wave appears.  Equal densities do reflect.
q = MediumParams(4.0, 1.0, 1.0, 1.0)
print(f"medium {q.as_dict()}: alpha = {q.alpha:.4f}, beta = {q.beta:.4f}")

# The kernel is a Gaussian in the warped coordinate plus a reflected copy
# weighted by beta; on each side it solves a plain heat equation.
xs = np.linspace(-3, 3, 7)
print("\nG(0.5, x, 0.4) at x =", xs)
for m in (p, q):
    print(f"  beta={m.beta:+.3f}:", np.round(K.G_eval(0.5, xs, 0.4, m), 6))

for x in (-0.8, 0.8):
    res = [K.pde_residual(0.6, x, 0.3, q, h) for h in (0.02, 0.01, 0.005)]
    print(f"heat-equation residual at x={x:+.1f}: " + ", ".join(f"{r:.2e}" for r in res))

cont, flux = K.interface_checks(0.5, 0.7, q)
print(f"\nacross x = 0: continuity defect {cont:.1e}, flux defect {flux:.1e}")

# Two identities that hold although no closed-form statement of them is used
# anywhere in the implementation.
print("Chapman-Kolmogorov defect:", f"{K.chapman_kolmogorov_defect(0.5, 0.5, 0.2, 0.4, q):.1e}")
x, y = np.random.default_rng(0).uniform(-3, 3, (2, 1000))
print("detailed balance, worst of 1000 pairs:", f"{K.detailed_balance_defect(0.3, x, y, q).max():.1e}")

# The time-derivative integrals scale like powers of the lag.
for order, eta in ((1, 1.0), (2, 0.5)):
    rec = K.derivative_integral_check(order, eta, np.geomspace(0.1, 1, 5), q, n_probes=7)
    print(f"order {order}, eta {eta}: slope {rec.details['slope']:.4f} "
          f"(expected {rec.details['expected_slope']:.4f})")
