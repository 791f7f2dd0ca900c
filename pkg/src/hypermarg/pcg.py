"""Preconditioned conjugate gradients."""

from dataclasses import dataclass

import numpy as np

from .operators import NumericalError

__all__ = ["PcgResult", "pcg_solve"]


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    converged: bool
    relres: float


def pcg_solve(op, rhs, pre=None, tol=1e-8, maxit=500, x0=None):
    """Solve ``op @ x = rhs`` for SPD ``op`` by preconditioned CG.

    Parameters
    ----------
    op : SymOp
        SPD operator (applications counted by the operator).
    rhs : array
    pre : preconditioner or None
        Object with ``apply_inverse(v)``; ``None`` means no preconditioning.
    tol : float
        Convergence is declared when ||rhs - op x|| <= tol * ||rhs||.
    maxit : int
    x0 : array or None
        Initial guess (zero if omitted).

    Returns
    -------
    PcgResult
        Solution, iteration count, a ``converged`` flag (callers decide
        whether a non-converged solve is an error), and the final relative
        residual.
    """
    m = op.m
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (m,):
        raise ValueError(f"rhs must have shape ({m},)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if maxit < 1:
        raise ValueError("maxit must be positive")

    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return PcgResult(x=np.zeros(m), iterations=0, converged=True, relres=0.0)

    if x0 is None:
        x = np.zeros(m)
        r = rhs.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
        r = rhs - op.matvec(x)

    def precond(v):
        return pre.apply_inverse(v) if pre is not None else v

    z = precond(r)
    p = z.copy()
    rz = float(np.dot(r, z))
    relres = float(np.linalg.norm(r)) / bnorm
    if relres <= tol:
        return PcgResult(x=x, iterations=0, converged=True, relres=relres)

    for it in range(1, maxit + 1):
        ap = op.matvec(p)
        pap = float(np.dot(p, ap))
        if not np.isfinite(pap) or pap <= 0.0:
            raise NumericalError(
                f"conjugate gradients hit a non-positive curvature {pap:.6e}; "
                "operator is not positive definite"
            )
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        relres = float(np.linalg.norm(r)) / bnorm
        if relres <= tol:
            return PcgResult(x=x, iterations=it, converged=True, relres=relres)
        z = precond(r)
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new

    return PcgResult(x=x, iterations=maxit, converged=False, relres=relres)
