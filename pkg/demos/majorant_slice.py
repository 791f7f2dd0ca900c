"""
Majorant geometry along one hyperparameter axis
===============================================

The outer loop of the MM optimizer replaces the marginal objective F with
a surrogate G that (a) touches F at the current anchor and (b) lies above
it everywhere else.  This script freezes an anchor on a small tomography
problem and walks one coordinate of theta across the feasible box,
tabulating both curves so the domination and the tangency are visible.

The same table is produced by the CLI:

    hypermarg majorant-slice slice_config.json

with the anchor, axis, and grid taken from the "slice" block.
"""

import numpy as np

from hypermarg import eval_F_exact, exact_surrogate, make_test_problem

problem = make_test_problem("tomo", s=5, n_src=4, n_rec=6, seed=0)
anchor = problem.box.center()
axis = 2  # correlation-length coordinate of the Matern prior

print(f"problem: {problem.name} (m={problem.m}, n={problem.n})")
print(f"anchor:  {np.array2string(anchor, precision=4)}")
print()

# Walk the axis from the anchor coordinate to the box edge.  Starting the
# grid exactly at the anchor puts the tangency in row 0.
grid = np.linspace(anchor[axis], problem.box.upper[axis], 12)
print(f"{'theta_'+str(axis):>10}  {'F':>14}  {'G':>14}  {'G - F':>12}")
for t in grid:
    theta = anchor.copy()
    theta[axis] = t
    f = eval_F_exact(problem, theta).value
    g = exact_surrogate(problem, theta, anchor)
    tag = "  <- tangent" if abs(t - anchor[axis]) < 1e-14 else ""
    print(f"{t:>10.4f}  {f:>14.6f}  {g:>14.6f}  {g - f:>12.4e}{tag}")

print()
print("G - F is zero at the anchor and nonnegative everywhere else;")
print("minimizing G therefore cannot increase F.")
