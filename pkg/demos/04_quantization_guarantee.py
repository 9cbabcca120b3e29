"""
How many coordinates end up on a level?
=======================================

With ``n`` samples in dimension ``d``, a critical point of least squares plus
a piecewise-affine regularizer has at most ``n`` coordinates off the level
set, for any positive ``lam``. We check the rate ``1 - n / d`` across a range
of ``lam``.
"""

# %%
import math

import numpy as np

from paro import (CompositeProblem, LeastSquaresLoss, SolverConfig, SyntheticSpec,
                  accelerated_proximal_gradient, check_criticality, gen_dataset,
                  integer_convex_par, quantization_rate)

n, d = 20, 200
ds = gen_dataset(SyntheticSpec(n=n, d=d, seed=3))
par = integer_convex_par(int(math.ceil(2 * np.max(np.abs(ds.x_true)))))
loss = LeastSquaresLoss(ds.A, ds.b)

# %%
print("guaranteed rate:", 1 - n / d)
for lam in np.logspace(-3, 1, 5):
    problem = CompositeProblem(loss, par, float(lam))
    x, tr = accelerated_proximal_gradient(problem, SolverConfig(max_iters=20000,
                                                                tol_residual=1e-10))
    print(f"lam={lam:8.3f} converged={tr.converged} qr={quantization_rate(x, par).rate:.3f} "
          f"train loss={loss.value(x):.2e} residual={check_criticality(problem, x).residual:.1e}")
