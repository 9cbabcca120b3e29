"""
Proximal maps as soft and hard quantizers
=========================================

The proximal map of ``lam * psi`` either slides an input toward zero or snaps
it onto a level. Which one happens depends on the input and on ``lam``.
"""

# %%
import numpy as np

from paro import nonconvex_par, prox_oracle, prox_scalar, prox_vector, quasiconvex_par
from paro import integer_convex_par

x = np.linspace(-3, 3, 13)

# %%
# Convex regularizer: inputs near a level snap to it, the rest shift by
# ``lam`` times the local slope.
convex = integer_convex_par(3, bounded=False)
print(np.column_stack([x, prox_vector(convex, 0.3, x)]))

# %%
# Quasiconvex regularizer with gap 1. For small ``lam`` some inputs pass
# through unchanged; once ``lam >= gap`` every output is a level.
qc = quasiconvex_par(1.0)
for lam in (0.4, 1.0, 2.0):
    z = prox_vector(qc, lam, x)
    print(lam, z, "all on levels:", bool(np.all(z == np.round(z))))

# %%
# Nonconvex regularizer: with ``lam`` at least half the widest gap, the prox is
# exactly the nearest-level projection.
nc = nonconvex_par([-2.0, -0.5, 0.25, 3.0])
print(prox_vector(nc, 1.375, np.array([-1.3, 0.0, 1.6, 1.7])))

# %%
# Every closed form is checked against a brute-force search over segments.
rng = np.random.default_rng(0)
worst = 0.0
for v in rng.normal(0, 3, 2000):
    worst = max(worst, abs(prox_scalar(qc, 0.6, v).point - prox_oracle(qc, 0.6, v).point))
print("largest disagreement with the oracle:", worst)

# %%
# ``prox_scalar`` also reports which level (if any) the output landed on.
r = prox_scalar(convex, 0.5, 1.3)
print(r.point, r.at_level, r.objective)
