"""
Sparse recovery with a convex quantizing regularizer
====================================================

For a sparse truth, a convex regularizer that grows linearly behaves like the
lasso. With ``lam`` set from the realized noise, the error falls like
``1 / sqrt(n)``.
"""

# %%
import math

import numpy as np

from paro import (CompositeProblem, LeastSquaresLoss, SolverConfig, SyntheticSpec,
                  accelerated_proximal_gradient, build_par, gen_dataset, lasso_lambda_bound)

d, s = 200, 5
par = build_par((0, 0.5, 1, 1.5, 2), (1.0, 1.1, 1.2, 1.3, 1.4), "convex")
print("a_max =", par.a_max, "nu =", par.nu)

# %%
ns, errors = [], []
for c in (4, 16, 64):
    n = int(c * s * math.log(d))
    errs = []
    for seed in range(4):
        ds = gen_dataset(SyntheticSpec(n=n, d=d, noise_sigma=0.1, truth="sparse",
                                       sparsity=s, seed=seed))
        lam = lasso_lambda_bound(ds, par.nu)
        x, _ = accelerated_proximal_gradient(
            CompositeProblem(LeastSquaresLoss(ds.A, ds.b), par, lam),
            SolverConfig(max_iters=3000, tol_residual=1e-9))
        errs.append(np.linalg.norm(x - ds.x_true))
    ns.append(n)
    errors.append(float(np.median(errs)))
    print(f"n={n:5d} median error={errors[-1]:.4f}")

# %%
print("log-log slope:", np.polyfit(np.log(ns), np.log(errors), 1)[0])
