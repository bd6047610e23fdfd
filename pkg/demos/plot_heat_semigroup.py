"""
Simulating the heat semigroup
=============================

Run the hypoelliptic diffusion on the Heisenberg chart and on the compact
group model. Then check the second moment, the gradient bound and the decay
rate of the variance against the certified spectral gap.
"""

import numpy as np

from contactcd.cd import cd_params, estimate_constants, gap_and_poincare
from contactcd.heatsim import (
    SimConfig,
    check_gradient_bound,
    estimate_semigroup,
    simulate_paths,
    variance_decay_rate,
)
from contactcd.jets import Polynomial
from contactcd.models import heisenberg, twisted

####################################################################
# Second moment on the Heisenberg group
# -------------------------------------
# With generator ``X^2 + Y^2`` each horizontal coordinate has variance ``2t``.
h = heisenberg(1)
x, y = Polynomial.coordinate(0, 3), Polynomial.coordinate(1, 3)
for t in (0.25, 0.5, 1.0):
    est = estimate_semigroup(SimConfig(h, t=t, dt=0.02, paths=4000, seed=1), x * x + y * y)
    print(f"t={t}: E[x^2+y^2] = {est['mean']:.3f} +- {est['stderr']:.3f} (exact {4 * t})")

####################################################################
# Escapes are rare
# ----------------
ens = simulate_paths(SimConfig(h, t=1.0, dt=0.02, paths=4000, seed=2, escape_radius=100.0))
print("escaped fraction at radius 100:", ens.escaped_fraction)

####################################################################
# Gradient bound on the compact group
# -----------------------------------
g = twisted(-1, 1)
gp = gap_and_poincare(cd_params(estimate_constants(g)))
f = Polynomial.coordinate(1, g.ambient_dim)
for t in (0.25, 0.5, 1.0):
    r = check_gradient_bound(SimConfig(g, t=t, dt=0.02, paths=4000, seed=3), f, gp)
    print(f"t={t}: lhs {r['lhs']:.4f} <= rhs {r['rhs']:.4f}  ({r['holds']})")

####################################################################
# Variance decay
# --------------
# The variance of ``P_t f`` under the stationary law decays at least at twice
# the spectral gap bound, here ``2/3``.
r = variance_decay_rate(SimConfig(g, t=1.0, dt=0.02, paths=4000, seed=4), f)
print("times", np.round(r["times"], 3), "variance", np.round(r["variance"], 4))
print(f"rate {r['rateEstimate']:.3f}, 95% CI {np.round(r['CI'], 3)}, certified lower bound {2 * gp['gapLowerBound']:.3f}")
