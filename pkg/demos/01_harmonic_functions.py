"""
Harmonic functions of the killed process
========================================

A stable process started outside [-1, 1] and killed when it enters the
interval has three natural positive harmonic functions: v1 (paths that end
by approaching +1), v_minus1 (approaching -1) and their sum v.  This script
evaluates them, looks at their behaviour next to the interval, and checks
that they can be read off the Green function of the killed process.
"""
import numpy as np

from stablecond import validate_params, v1, v_minus1, v_total, green_u
from stablecond.harmonic import green_boundary_ratio, lemma31_residual

# %%
# Values on both sides of the interval
# ------------------------------------
# For alpha = 1/2 and rho = 1/2, v1(3) = 2**(-3/4) and v1(-3) = 2**(-7/4).

p = validate_params(0.5, 0.5)
xs = np.array([-10.0, -3.0, -1.5, 1.5, 3.0, 10.0])
print("alpha=0.5 rho=0.5")
print("     x        v1       v_-1         v")
for x, a, b, c in zip(xs, v1(p, xs), v_minus1(p, xs), v_total(p, xs)):
    print(f"{x:6.1f}  {a:9.5f}  {b:9.5f}  {c:9.5f}")
print("closed form v1(3) =", 2 ** -0.75)

# %%
# Behaviour next to the interval
# ------------------------------
# v1 blows up at +1 like (x - 1)**(alpha*rho_hat - 1) and vanishes at -1
# like (-1 - x)**(alpha*rho).  A log-log fit shows both exponents.

p = validate_params(1.5, 0.45)
s = 10.0 ** -np.arange(5, 10)
slope_pos = np.polyfit(np.log(s), np.log(v1(p, 1 + s)), 1)[0]
slope_neg = np.polyfit(np.log(s), np.log(v1(p, -1 - s)), 1)[0]
print(f"\nalpha=1.5 rho=0.45: slope at +1 {slope_pos:.4f} (expected {p.arh - 1:.4f}), "
      f"slope at -1 {slope_neg:.4f} (expected {p.ar:.4f})")

# %%
# v1 from the Green function
# --------------------------
# Rescaling the Green function u(x, 1 + delta) by delta**(alpha*rho) recovers
# v1 as delta -> 0.  The relative error falls with delta.

for x in (3.0, -2.0):
    for d in (1e-3, 1e-4, 1e-5, 1e-6):
        r = green_boundary_ratio(p, x, d)
        print(f"x={x:5.1f} delta={d:.0e}  ratio={r:.8f}  rel. error={abs(r / v1(p, x) - 1):.2e}")

# %%
# An exact identity between u and v1
# -----------------------------------
# The Green function and v1 satisfy an algebraic identity for x > y > 1 and
# x < -1 < 1 < y; the residual is at rounding level.

worst = max(abs(lemma31_residual(p, x, y)) for x in (-20.0, -2.0, 5.0, 20.0) for y in (1.05, 1.5, 3.0)
            if x > y or x < -1)
print(f"\nlargest identity residual: {worst:.2e}")
print("u(3, 2) =", green_u(p, 3.0, 2.0)[0])
