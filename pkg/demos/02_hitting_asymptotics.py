"""
Hitting laws and their small-window limits
==========================================

Conditioning the process on a hitting event of vanishing probability needs
the rate at which that probability vanishes.  Three events are used:

* alpha < 1: the point of closest reach to 0 lies in (1, 1 + eps);
* alpha >= 1: the first entrance into (-(1+eps), 1+eps) lands in (1, 1+eps);
* alpha > 1, under the process conditioned to avoid 0: closest reach in (1, 1 + eps).

In each case the probability divided by its scale converges to a constant
multiple of a harmonic function.
"""
import numpy as np

from stablecond import validate_params, v1
from stablecond.harmonic import HKind, avoid_zero_e
from stablecond.hitting_laws import (
    HittingWindow,
    Side,
    circ_closest_reach_mass,
    closest_reach_asymptote,
    closest_reach_mass,
    entrance_window_asymptote,
    entrance_window_mass,
    first_entrance_mass,
)

# %%
# Closest reach, alpha < 1
# ------------------------

p = validate_params(0.5, 0.3)
for x in (3.0, -2.0):
    lim = closest_reach_asymptote(p, x, Side.POSITIVE)
    print(f"closest reach from x={x}: limit {lim:.8f}")
    for eps in (1e-3, 1e-4, 1e-5):
        r = closest_reach_mass(p, x, HittingWindow(1.0, 1.0 + eps)) / eps
        print(f"   eps={eps:.0e}  mass/eps={r:.8f}  rel. gap={abs(r / lim - 1):.2e}")
print("total mass:", closest_reach_mass(p, 3.0, HittingWindow(0.0, 3.0, Side.BOTH)))

# %%
# First entrance, alpha >= 1
# --------------------------
# The window probability scales like eps**(1 - alpha*rho_hat).

p = validate_params(1.5, 0.45)
c, k = entrance_window_asymptote(p, 2.0, Side.POSITIVE)
print(f"\nentrance from x=2: mass ~ {c:.6f} * eps**{k:.3f}")
for eps in (1e-2, 1e-3, 1e-4):
    m = entrance_window_mass(p, 2.0, eps, Side.POSITIVE)
    print(f"   eps={eps:.0e}  mass/eps**k={m / eps ** k:.6f}")
print("first-entrance density integrates to", first_entrance_mass(p, 2.0))

# %%
# Which side wins
# ---------------
# With rho < 1/2 the negative window becomes negligible against the positive
# one, with ratio of order eps**(alpha*(rho_hat - rho)).

eps = np.array([1e-2, 1e-3, 1e-4])
ratio = [entrance_window_mass(p, 2.0, e, Side.NEGATIVE) / entrance_window_mass(p, 2.0, e, Side.POSITIVE)
         for e in eps]
slope = np.polyfit(np.log(eps), np.log(ratio), 1)[0]
print(f"\nnegative/positive ratio slope {slope:.4f}, predicted {p.alpha * (p.rho_hat - p.rho):.4f}")

# %%
# Avoiding zero, alpha > 1
# ------------------------

p = validate_params(1.5, 0.5)
x, eps = 3.0, 1e-5
m = circ_closest_reach_mass(p, x, HittingWindow(1.0, 1.0 + eps), HKind.V1)
print(f"\n(e(x)/eps) * mass = {avoid_zero_e(p, x) / eps * m:.8f}, "
      f"limit (alpha-1)/2 v1(x) = {0.25 * v1(p, x):.8f}")
