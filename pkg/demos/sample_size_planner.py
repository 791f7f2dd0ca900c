"""
Planning probe counts and quadrature depth ahead of a run
=========================================================

Before spending matvecs, the sample-size calculators answer two questions
from spectral constants alone: how many Lanczos steps until the
quadrature error is negligible, and how many probes until the stochastic
objective is uniformly close to the true one over the whole box.
"""

import numpy as np

from hypermarg import (
    Box,
    SpectralConstants,
    estimate_spectral_constants,
    lanczos_steps_bound,
    m3c_sample_schedule,
    make_test_problem,
    uniform_slq_plan,
)

# Quadrature depth grows with the condition number but only
# logarithmically with the accuracy target.
print("Lanczos steps k(kappa, eps) at m = 4096:")
print(f"{'kappa':>8}  " + "  ".join(f"eps={e:<6}" for e in (0.5, 0.1, 0.01)))
for kappa in (10.0, 100.0, 1000.0):
    row = [lanczos_steps_bound(kappa, 4096, e) for e in (0.5, 0.1, 0.01)]
    print(f"{kappa:>8.0f}  " + "  ".join(f"{k:<10}" for k in row))
print()

# Probe counts.  With lipschitz = 0 the covariance is fixed in theta, no
# covering argument is needed, and the guarantee prices a single matrix.
fixed = SpectralConstants(alpha=1.0, beta=8.0, lipschitz=0.0,
                          frob_max=16.0, two_max=8.0)
plan = uniform_slq_plan(eps=0.5, delta=0.05, m=256, p=3, radius=1.0,
                        constants=fixed)
print("single-matrix plan (lipschitz = 0):")
print(f"  eps=0.5, delta=0.05, m=256  ->  n_probes = {plan.n_probes}, "
      f"k_steps = {plan.k_steps}")

# Once Psi varies over the box the guarantee must hold at every theta
# simultaneously; the covering number enters through log_gamma and the
# price is steep.  These certified counts are worst-case by design —
# practical runs use far fewer probes and audit instead.
varying = SpectralConstants(alpha=1.0, beta=8.0, lipschitz=2.0,
                            frob_max=16.0, two_max=8.0)
plan = uniform_slq_plan(eps=0.5, delta=0.05, m=256, p=3, radius=1.0,
                        constants=varying)
print("uniform-over-the-box plan (lipschitz = 2):")
print(f"  same targets               ->  n_probes = {plan.n_probes}, "
      f"k_steps = {plan.k_steps}, log_gamma = {plan.log_gamma:.1f}")
print()

# The MM chain does not need uniform accuracy at every outer iteration:
# early iterations tolerate loose estimates, the tolerance tightens
# geometrically, and the failure probability telescopes across the chain.
sched = m3c_sample_schedule(eps0=2.0, delta=0.05, rho=0.5, n_iters=6,
                            m=256, p=3, radius=1.0, constants=varying)
print("geometric m3c schedule (eps halves each outer iteration):")
print(f"{'iter':>4}  {'eps':>8}  {'n_probes':>14}")
for i, (e, n) in enumerate(zip(sched.eps, sched.n_probes)):
    print(f"{i:>4}  {e:>8.4f}  {n:>14}")
print()

# Constants can also be measured from a concrete problem instead of
# asserted.  Over the full tomo box the noise floor reaches 1e-5, the
# measured alpha collapses, and the certified plan explodes — the
# calculator is telling you the box is too generous to certify.
problem = make_test_problem("tomo", s=5, n_src=4, n_rec=6, seed=0)
est = estimate_spectral_constants(problem, n_samples=12, seed=0)
print("measured constants, full tomo box:")
print(f"  alpha={est.alpha:.2e}  beta={est.beta:.1f}  "
      f"lipschitz={est.lipschitz:.1f}  ->  "
      f"n_probes = {uniform_slq_plan(0.5, 0.1, problem.m, 3, problem.box.radius(), est).n_probes:.1e}")

# Restricting to the operating range the optimizer actually visits
# brings alpha up and the certificate back to something payable.
narrow = Box(lower=np.array([0.01, 0.5, 0.3]),
             upper=np.array([0.2, 2.0, 1.0]))
problem_op = make_test_problem("tomo", s=5, n_src=4, n_rec=6, seed=0,
                               box=narrow)
est_op = estimate_spectral_constants(problem_op, n_samples=12, seed=0)
plan_op = uniform_slq_plan(0.5, 0.1, problem_op.m, 3, narrow.radius(), est_op)
print("measured constants, restricted operating box:")
print(f"  alpha={est_op.alpha:.2e}  beta={est_op.beta:.1f}  "
      f"lipschitz={est_op.lipschitz:.1f}  ->  "
      f"n_probes = {plan_op.n_probes:.1e}")
