"""
Three solvers on one problem
============================

Least squares with a quasiconvex regularizer, solved by proximal gradient,
its accelerated variant and ADMM. Every solver returns the final point and a
per-iteration trace.
"""

# %%
import numpy as np

from paro import (CompositeProblem, LeastSquaresLoss, SolverConfig, SyntheticSpec,
                  accelerated_proximal_gradient, admm, check_criticality, gen_dataset,
                  proximal_gradient, quasiconvex_par)

ds = gen_dataset(SyntheticSpec(n=20, d=200, noise_sigma=0.1, seed=0))
problem = CompositeProblem(LeastSquaresLoss(ds.A, ds.b), quasiconvex_par(1.0), lam=1.0)
cfg = SolverConfig(max_iters=3000, tol_residual=1e-10)

# %%
for solver in (proximal_gradient, accelerated_proximal_gradient, admm):
    x, trace = solver(problem, cfg)
    rep = check_criticality(problem, x)
    print(f"{solver.__name__:32s} iters={trace.n_iter:5d} F={trace.column('F')[-1]:.5f} "
          f"qr={trace.column('qrate')[-1]:.3f} residual={rep.residual:.1e}")

# %%
# The trace is a small table. Here are the columns and the first rows of the
# accelerated run, in CSV form.
_, trace = accelerated_proximal_gradient(problem, SolverConfig(max_iters=5))
print(trace.to_csv())

# %%
# A callback sees every iterate, which is handy for custom metrics.
seen = []
proximal_gradient(problem, SolverConfig(max_iters=50),
                  callback=lambda t, x: seen.append(np.count_nonzero(x)))
print("nonzeros along the path:", seen[:10], "...", seen[-1])
