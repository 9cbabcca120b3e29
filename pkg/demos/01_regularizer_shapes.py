"""
Building piecewise-affine regularizers
======================================

A regularizer is described by its nonnegative levels and the slope on each
segment. Here we build one of each family, evaluate it on a grid and look at
where the kinks sit.
"""

# %%
import math

import numpy as np

from paro import (build_par, integer_convex_par, nonconvex_par, par_approx_classic,
                  par_subdifferential, par_value, quantization_rate, quasiconvex_par)

# %%
# A convex regularizer on the integers {0, ±1, ±2} with slopes 1 and 2. The last
# slope is infinite, so values beyond 2 in magnitude are infeasible.
convex = integer_convex_par(2)
print(convex.levels, convex.slopes, convex.intercepts)
print(par_value(convex, np.array([0.5, 1.0, 1.5, 2.0, 2.5])))

# %%
# The quasiconvex family repeats one period: slope 1 on the first half of each
# gap and flat on the second half.
qc = quasiconvex_par(1.0)
x = np.linspace(0, 3, 7)
print(np.column_stack([x, par_value(qc, x)]))

# %%
# The nonconvex family is the distance to the nearest level, with +inf outside
# the outermost levels. Levels need not be symmetric.
nc = nonconvex_par([-1.0, 0.0, 0.5, 2.0])
print(par_value(nc, np.array([-1.5, -0.5, 0.25, 1.25, 3.0])))

# %%
# Classical penalties can be approximated on a grid of gap q. The square
# approximant sits above x**2 / 2 by at most q**2 / 8.
q = 0.25
sq = par_approx_classic("square", q, 2.0)
grid = np.linspace(0, 2, 2001)
print("max gap above x^2/2:", np.max(par_value(sq, grid) - 0.5 * grid ** 2), "vs", q * q / 8)

# %%
# Subdifferentials are intervals. At a level they open up; between levels they
# collapse to the local slope.
for point in (0.0, 1.0, 1.3):
    s = par_subdifferential(convex, point)
    print(f"x={point}: [{s.lo}, {s.hi}]")

# %%
# Custom regularizers use the general family, where every breakpoint counts
# as a level. Slopes may be negative in the middle.
general = build_par((0, 1, 2), (0.5, -0.25, 1.0), "general")
print(general.family, general.a_max, par_value(general, np.array([1.0, 1.5, 2.0, 3.0])))

# %%
# The quantization rate counts coordinates within a tolerance of a level.
v = np.array([0.0, 1.0 + 1e-9, 0.4, -2.0, math.pi])
print(quantization_rate(v, convex).rate)
