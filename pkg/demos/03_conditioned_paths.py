"""
Simulating the conditioned process
==================================

The h-transform with v1 is the process conditioned to hit [-1, 1]
continuously at +1.  We check three things at small scale:

1. the weighted exit functional under v1 has mean 1 (v1 is harmonic);
2. chains of the h-transformed process end next to +1;
3. conditioning on a small hitting window gives the same time-t law as
   weighting by v1.

Larger versions of each run through the ``stablecond`` command line tool.
"""
import numpy as np

from stablecond import RngStream, validate_params
from stablecond.harmonic import HKind
from stablecond.hitting_laws import Side
from stablecond.pathsim import (
    CompactSet,
    Conditioning,
    ConditioningKind,
    SimConfig,
    doob_chain_batch,
    conditional_law_estimator,
    weighted_exit_estimator,
    weighted_time_t_estimator,
)

p = validate_params(1.5, 0.5)

# %%
# Harmonicity of v1
# -----------------

K = CompactSet.symmetric(1.2, 3.0)
c = SimConfig(dt=1e-3, horizon=50.0, n_paths=20_000, rng=RngStream(1))
for kind in (HKind.V1, HKind.VMINUS1, HKind.V):
    e = weighted_exit_estimator(p, 2.0, K, kind, c)
    print(f"exit functional under {kind.name:7s}: {e.value:.4f} +- {e.std_error:.4f}")

# %%
# Where the conditioned process ends
# ----------------------------------

s = doob_chain_batch(p, 2.0, HKind.V1, SimConfig(dt=1e-2, horizon=50.0, n_paths=500,
                                                  boundary_cutoff=1e-3, rng=RngStream(2)))
print(f"\nkilled within the horizon: {s.killed_fraction:.3f}")
print(f"terminal position in (1, 1.1): {s.fraction_in(1.0, 1.1):.3f}")
print("median lifetime:", np.median(s.death_time[s.killed]))

# %%
# Conditioning versus weighting
# -----------------------------
# P(xi_t > 2, t < T | entrance window near +1) against the v1-weighted
# expectation on the same paths.

c = SimConfig(dt=1e-3, horizon=5.0, n_paths=20_000, rng=RngStream(3))
ref = weighted_time_t_estimator(p, 3.0, 0.5, HKind.V1, lambda y: y > 2.0, c, kill_radius=1.3)
print(f"\nweighted by v1: {ref.value:.4f} +- {ref.std_error:.4f}")
for eps in (0.2, 0.1, 0.05):
    cond = Conditioning(ConditioningKind.ENTRANCE_WINDOW, eps, Side.POSITIVE)
    est = conditional_law_estimator(p, 3.0, 0.5, lambda y: y > 2.0, cond, 0.3, c)
    print(f"conditioned, eps={eps:4.2f}: {est.value:.4f} +- {est.std_error:.4f}")
