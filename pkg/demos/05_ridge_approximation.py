"""
Replacing ridge with a quantizing regularizer
=============================================

The chord interpolant of ``x**2 / 2`` on a grid of gap ``q`` gives estimates
close to ridge, and the distance shrinks with ``q``. Almost every coordinate
of the result lies on the grid.
"""

# %%
import math

import numpy as np

from paro import (CompositeProblem, LeastSquaresLoss, SolverConfig, SyntheticSpec, admm,
                  error_report, gen_dataset, par_approx_classic, recommended_ridge_lambda,
                  ridge_closed_form)

d, n, sigma = 100, 20, 0.1
ds = gen_dataset(SyntheticSpec(n=n, d=d, noise_sigma=sigma, seed=1))

# %%
for q in (0.1, 0.05, 0.01):
    lam = recommended_ridge_lambda(ds, q, sigma, float(np.linalg.norm(ds.x_true)))
    par = par_approx_classic("square", q, q * math.ceil(2 * np.max(np.abs(ds.x_true)) / q))
    x_par, _ = admm(CompositeProblem(LeastSquaresLoss(ds.A, ds.b), par, lam),
                    SolverConfig(max_iters=20000, tol_residual=1e-10, admm_rho=max(lam, 1e-3)))
    x_ridge = ridge_closed_form(ds, lam)
    e = x_par - x_ridge
    print(f"q={q:5.2f} lam={lam:.4f} |x_par - x_ridge|={np.linalg.norm(e):.4f} "
          f"(bound {math.sqrt(d / 2) * q:.4f}) "
          f"qr={error_report(ds, x_par, par).quantization_rate:.2f} "
          f"l2 error par/ridge={error_report(ds, x_par).l2_error:.3f}/"
          f"{error_report(ds, x_ridge).l2_error:.3f}")
