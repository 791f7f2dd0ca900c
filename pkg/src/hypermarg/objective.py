"""The marginal-likelihood objective: exact, stochastic, and gradient forms.

The objective being minimized over theta (up to additive constants) is

    F(theta) = -log pi(theta) + (1/2) log det Psi(theta)
             + (1/2) (A mu_x - b)^T Psi(theta)^{-1} (A mu_x - b).

Four evaluation routes are provided and cross-validated against one another
by the test-suite:

* ``eval_F_exact`` / ``grad_F_exact``  —  dense factorizations, the oracle;
* ``eval_F_slq``  —  log det replaced by stochastic Lanczos quadrature over a
  fixed probe set (the sample-average surface the fixed-sample optimizer
  minimizes), misfit solved by preconditioned CG;
* ``grad_F_mc``  —  Monte-Carlo trace-term gradient, either from per-probe
  solves (default) or the symmetrized estimator that reuses the Lanczos
  bases through an :class:`SlqWorkspace`;
* ``grad_fd``  —  forward finite differences of any scalar objective,
  bound-aware, used as the derivative-free fallback and the universal
  cross-check.

When a preconditioner is supplied, the log-determinant splits into the
preconditioner's exact part plus quadrature on the whitened operator
G Psi G^T, and solves are preconditioned; without one, quadrature runs on
Psi directly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lanczos import lanczos_decompose
from .model import build_psi
from .nystrom import WhitenedPreconditioner, nystrom_preconditioner
from .operators import (
    DENSE_LIMIT,
    CallableSymOp,
    NumericalError,
    ScaledIdentityOp,
)
from .parallel import probe_map
from .pcg import pcg_solve

__all__ = [
    "ObjectiveEval",
    "SlqWorkspace",
    "eval_F_exact",
    "eval_F_slq",
    "grad_F_exact",
    "grad_F_mc",
    "grad_fd",
    "psi_preconditioner",
    "dense_objective_pieces",
]


@dataclass
class ObjectiveEval:
    """One objective evaluation, with the pieces kept separate.

    ``value = prior_part + 0.5 * logdet_part + 0.5 * misfit`` holds to
    roundoff; ``r`` is the solved residual Psi^{-1}(A mu_x - b) for reuse in
    gradients; ``pcg_iterations`` is 0 on dense paths.
    """

    value: float
    r: np.ndarray
    misfit: float
    logdet_part: float
    prior_part: float
    pcg_iterations: int
    converged: bool = True


@dataclass
class SlqWorkspace:
    """Per-theta cache of Lanczos decompositions for estimator reuse.

    Anchored to one (theta, probes, k_steps, preconditioner) combination;
    consumers must present the same anchor or get an error.  Populated by
    ``eval_F_slq`` and consumed by the symmetrized ``grad_F_mc``, which turns
    each stored decomposition into an inverse-square-root application at no
    extra operator cost.
    """

    theta: np.ndarray = None
    k_steps: int = None
    pre: object = None
    probes: object = None
    decomps: list = None

    def populated(self):
        return self.decomps is not None

    def check_anchor(self, theta, probes, k_steps, pre):
        if not self.populated():
            raise ValueError("workspace has not been populated by an evaluation")
        if (
            self.theta.shape != np.shape(theta)
            or not np.array_equal(self.theta, theta)
            or self.probes is not probes
            or self.k_steps != k_steps
            or self.pre is not pre
        ):
            raise ValueError(
                "workspace anchor mismatch: it was populated at a different "
                "(theta, probes, k_steps, preconditioner) combination"
            )


def dense_objective_pieces(problem, theta):
    """Dense Psi, its Cholesky factor, residual offset and solve.

    Shared by the exact objective/gradient paths.  Returns
    (psi_dense, cho, c, r) with cho a ``cho_factor`` result.
    """
    if problem.m > DENSE_LIMIT:
        raise ValueError(
            f"dense objective path refused: m={problem.m} exceeds {DENSE_LIMIT}"
        )
    psi_op = build_psi(problem, theta)
    psi_dense = psi_op.dense()
    try:
        cho = scipy.linalg.cho_factor(psi_dense, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"dense Psi factorization failed: {exc}") from None
    c = problem.residual_offset(theta)
    r = scipy.linalg.cho_solve(cho, c)
    return psi_dense, cho, c, r


def eval_F_exact(problem, theta):
    """Exact objective by dense factorization (oracle path, m small)."""
    theta = np.asarray(theta, dtype=float)
    _, cho, c, r = dense_objective_pieces(problem, theta)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    misfit = float(np.dot(c, r))
    prior = problem.prior.neglog(theta)
    return ObjectiveEval(
        value=prior + 0.5 * logdet + 0.5 * misfit,
        r=r,
        misfit=misfit,
        logdet_part=logdet,
        prior_part=prior,
        pcg_iterations=0,
    )


def _quad_operator(psi_op, pre):
    """The operator whose log-quadforms estimate the stochastic logdet part."""
    if pre is None:
        return psi_op
    return CallableSymOp(
        psi_op.m,
        lambda v: pre.factor_apply(psi_op.matvec(pre.factor_t_apply(v))),
    )


def eval_F_slq(
    problem,
    theta,
    probes,
    k_steps,
    pre=None,
    pcg_tol=1e-8,
    pcg_maxit=500,
    workspace=None,
):
    """Sample-average objective: SLQ log-determinant plus CG misfit.

    Deterministic given (problem, theta, probes, k_steps, pre).  With a
    preconditioner, the log-determinant splits as
    ``pre.logdet_of_approximation() + mean_i w_i^T log(G Psi G^T) w_i``;
    without one, quadrature runs on Psi directly.

    If ``workspace`` is supplied it is filled with the per-probe Lanczos
    decompositions, anchored at this call's arguments, so a following
    symmetrized gradient evaluation can reuse the bases.
    """
    theta = np.asarray(theta, dtype=float)
    if probes.m != problem.m:
        raise ValueError(
            f"probe dimension {probes.m} does not match problem dimension {problem.m}"
        )
    psi_op = build_psi(problem, theta)
    quad_op = _quad_operator(psi_op, pre)

    def one_probe(i):
        return lanczos_decompose(quad_op, probes.column(i), k_steps)

    decomps = probe_map(one_probe, range(probes.n_probes))
    quads = np.array([d.quadform_log() for d in decomps])
    logdet_part = float(np.mean(quads))
    if pre is not None:
        logdet_part += pre.logdet_of_approximation()

    c = problem.residual_offset(theta)
    res = pcg_solve(psi_op, c, pre=pre, tol=pcg_tol, maxit=pcg_maxit)
    misfit = float(np.dot(c, res.x))
    prior = problem.prior.neglog(theta)

    if workspace is not None:
        workspace.theta = theta.copy()
        workspace.k_steps = k_steps
        workspace.pre = pre
        workspace.probes = probes
        workspace.decomps = decomps

    return ObjectiveEval(
        value=prior + 0.5 * logdet_part + 0.5 * misfit,
        r=res.x,
        misfit=misfit,
        logdet_part=logdet_part,
        prior_part=prior,
        pcg_iterations=res.iterations,
        converged=res.converged,
    )


def _deriv_builders(problem):
    """Validate derivative-builder bookkeeping; None entries mean 'zero'."""
    if len(problem.dq_builders) != problem.q_dim or len(problem.dr_builders) != problem.q_dim:
        raise ValueError(
            "problem must supply one dQ and one dR builder slot per psi component"
        )
    if len(problem.da_builders) != problem.ell:
        raise ValueError("problem must supply one dA builder per forward-map component")
    for j, builder in enumerate(problem.da_builders):
        if builder is None:
            raise ValueError(f"derivative builder for forward-map component {j} is missing")


class _DerivativeActions:
    """Applies dPsi/dtheta_j to vectors, sharing the A^T / Q A^T legs."""

    def __init__(self, problem, theta):
        _deriv_builders(problem)
        psi_params, y = problem.split(theta)
        self.problem = problem
        self.a_op = problem.build_a(y)
        self.q_op = problem.build_q(psi_params)
        self.dq_ops = [
            None if b is None else b(psi_params) for b in problem.dq_builders
        ]
        self.dr_ops = [
            None if b is None else b(psi_params) for b in problem.dr_builders
        ]
        self.da_ops = [b(y) for b in problem.da_builders]

    def apply_all(self, v):
        """(p, m) array of dPsi/dtheta_j applied to one vector v."""
        problem = self.problem
        out = np.zeros((problem.p, problem.m))
        at_v = self.a_op.rmatvec(v)
        for j in range(problem.q_dim):
            acc = np.zeros(problem.m)
            if self.dq_ops[j] is not None:
                acc += self.a_op.matvec(self.dq_ops[j].matvec(at_v))
            if self.dr_ops[j] is not None:
                acc += self.dr_ops[j].matvec(v)
            out[j] = acc
        if problem.ell:
            q_at_v = self.q_op.matvec(at_v)
            for i, da_op in enumerate(self.da_ops):
                j = problem.q_dim + i
                out[j] = da_op.matvec(q_at_v) + self.a_op.matvec(
                    self.q_op.matvec(da_op.rmatvec(v))
                )
        return out

    def forward_deriv_mu(self):
        """(ell, m) array of (dA/dy_j) mu_x, or None when mu_x = 0."""
        problem = self.problem
        if not problem.ell or not np.any(problem.mu_x != 0.0):
            return None
        return np.array([da.matvec(problem.mu_x) for da in self.da_ops])


def grad_F_exact(problem, theta):
    """Exact gradient by dense algebra (oracle path)."""
    theta = np.asarray(theta, dtype=float)
    _deriv_builders(problem)
    psi_params, y = problem.split(theta)
    _, cho, c, r = dense_objective_pieces(problem, theta)
    psi_inv = scipy.linalg.cho_solve(cho, np.eye(problem.m))

    a_dense = problem.build_a(y).dense()
    q_dense = problem.build_q(psi_params).dense()
    grad = problem.prior.grad_neglog(theta)

    for j in range(problem.q_dim):
        dpsi = np.zeros((problem.m, problem.m))
        if problem.dq_builders[j] is not None:
            dq = problem.dq_builders[j](psi_params).dense()
            dpsi += a_dense @ dq @ a_dense.T
        if problem.dr_builders[j] is not None:
            dpsi += problem.dr_builders[j](psi_params).dense()
        grad[j] += 0.5 * float(np.vdot(psi_inv, dpsi)) - 0.5 * float(r @ dpsi @ r)

    for i in range(problem.ell):
        j = problem.q_dim + i
        da = problem.da_builders[i](y).dense()
        half = da @ q_dense @ a_dense.T
        dpsi = half + half.T
        misfit_term = float(r @ dpsi @ r)
        if np.any(problem.mu_x != 0.0):
            misfit_term -= 2.0 * float(r @ (da @ problem.mu_x))
        grad[j] += 0.5 * float(np.vdot(psi_inv, dpsi)) - 0.5 * misfit_term

    return grad


def grad_F_mc(
    problem,
    theta,
    probes,
    k_steps,
    pre=None,
    symmetrized=False,
    pcg_tol=1e-8,
    pcg_maxit=500,
    workspace=None,
    stats=None,
):
    """Monte-Carlo gradient of F: stochastic trace terms, solved misfit terms.

    The trace of Psi^{-1} dPsi is estimated per component as an average over
    the probe set.  Two estimators:

    * default — per-probe solves u_i = Psi^{-1} w_i (preconditioned CG),
      averaging u_i^T dPsi w_i;
    * ``symmetrized=True`` — zeta_i = G^T (G Psi G^T)^{-1/2} w_i via Lanczos,
      averaging zeta_i^T dPsi zeta_i; with a populated ``workspace`` from
      ``eval_F_slq`` at the same anchor, the stored bases are reused and no
      new Lanczos runs are needed.

    ``stats`` (optional dict) accumulates ``pcg_iters``.
    """
    theta = np.asarray(theta, dtype=float)
    psi_op = build_psi(problem, theta)
    actions = _DerivativeActions(problem, theta)
    n_probes = probes.n_probes

    if symmetrized:
        if workspace is not None:
            workspace.check_anchor(theta, probes, k_steps, pre)
            decomps = workspace.decomps
        else:
            quad_op = _quad_operator(psi_op, pre)

            def one_decomp(i):
                return lanczos_decompose(quad_op, probes.column(i), k_steps)

            decomps = probe_map(one_decomp, range(n_probes))

        def one_zeta(d):
            z = d.inv_sqrt_apply()
            return pre.factor_t_apply(z) if pre is not None else z

        zetas = [one_zeta(d) for d in decomps]
        trace_terms = np.array([actions.apply_all(z) @ z for z in zetas])
    else:

        def one_solve(i):
            res = pcg_solve(psi_op, probes.column(i), pre=pre, tol=pcg_tol, maxit=pcg_maxit)
            if not res.converged:
                raise NumericalError(
                    f"probe solve {i} did not converge within {pcg_maxit} iterations "
                    f"(relative residual {res.relres:.3e})"
                )
            return res

        solves = probe_map(one_solve, range(n_probes))
        if stats is not None:
            stats["pcg_iters"] = stats.get("pcg_iters", 0) + sum(
                s.iterations for s in solves
            )
        trace_terms = np.array(
            [
                actions.apply_all(probes.column(i)) @ solves[i].x
                for i in range(n_probes)
            ]
        )

    trace_est = trace_terms.mean(axis=0)

    c = problem.residual_offset(theta)
    res = pcg_solve(psi_op, c, pre=pre, tol=pcg_tol, maxit=pcg_maxit)
    if stats is not None:
        stats["pcg_iters"] = stats.get("pcg_iters", 0) + res.iterations
    r = res.x
    dpsi_r = actions.apply_all(r)
    misfit_terms = dpsi_r @ r
    da_mu = actions.forward_deriv_mu()
    if da_mu is not None:
        misfit_terms[problem.q_dim :] -= 2.0 * (da_mu @ r)

    return problem.prior.grad_neglog(theta) + 0.5 * trace_est - 0.5 * misfit_terms


def grad_fd(f, theta, box, eps_rel=1e-6, scheme="forward"):
    """Finite-difference gradient of a scalar function, bound-aware.

    Step size h_j = eps_rel * max(1, |theta_j|).  ``scheme="forward"`` uses
    p+1 evaluations, stepping into whichever side of the box has more room;
    ``scheme="central"`` uses second-order differences wherever both sides
    have room and falls back to a one-sided step near a bound.  A box
    thinner than 2 h_j in any coordinate is an error either way.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    if box.p != p:
        raise ValueError("box dimension does not match theta")
    if scheme not in ("forward", "central"):
        raise ValueError(f"unknown difference scheme {scheme!r}")
    h = eps_rel * np.maximum(1.0, np.abs(theta))
    if np.any(box.upper - box.lower < 2.0 * h):
        raise ValueError("box is thinner than twice the difference step in some coordinate")
    f0 = None
    grad = np.zeros(p)
    for j in range(p):
        step = np.zeros(p)
        room_up = box.upper[j] - theta[j]
        room_dn = theta[j] - box.lower[j]
        if scheme == "central" and room_up >= h[j] and room_dn >= h[j]:
            step[j] = h[j]
            grad[j] = (f(theta + step) - f(theta - step)) / (2.0 * h[j])
            continue
        if f0 is None:
            f0 = f(theta)
        sign = 1.0 if room_up >= room_dn else -1.0
        step[j] = sign * h[j]
        grad[j] = sign * (f(theta + step) - f0) / h[j]
    return grad


def psi_preconditioner(problem, theta, rank=20, seed=0, psi_op=None):
    """Build the appropriate Nystrom preconditioner for Psi(theta).

    With a scaled-identity noise covariance the known shift is used directly;
    otherwise the operator is symmetrically whitened by R^{-1/2} first and
    the sketch runs on the unit-shift whitened operator.
    """
    theta = np.asarray(theta, dtype=float)
    psi_params, _ = problem.split(theta)
    if psi_op is None:
        psi_op = build_psi(problem, theta)
    rank = int(min(rank, problem.m))
    r_op = problem.build_r(psi_params)
    if isinstance(r_op, ScaledIdentityOp):
        return nystrom_preconditioner(psi_op, r_op.scale, rank, seed)
    if not hasattr(r_op, "apply_inverse_sqrt") or not hasattr(r_op, "logdet"):
        raise ValueError(
            "noise covariance operator must expose apply_inverse_sqrt and logdet "
            "to be whitened for preconditioning"
        )
    white = CallableSymOp(
        problem.m,
        lambda v: r_op.apply_inverse_sqrt(psi_op.matvec(r_op.apply_inverse_sqrt(v))),
    )
    inner = nystrom_preconditioner(white, 1.0, rank, seed)
    return WhitenedPreconditioner(inner=inner, white_op=r_op)
