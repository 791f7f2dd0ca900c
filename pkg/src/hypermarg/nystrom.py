"""Randomized Nystrom preconditioner for shifted covariance-like operators.

For an SPD operator of the form  M = C + mu * I  with C (approximately) low
rank, a rank-L randomized Nystrom sketch of C yields the factored approximation

    P = U diag(lam) U^T + mu * (I - U U^T),     U orthonormal, lam >= 0,

whose inverse and inverse square root are cheap (rank-L algebra plus a scaled
identity).  Used two ways downstream: as the CG preconditioner for solves with
the marginal covariance, and — through ``logdet_of_approximation`` and the
inverse square root — to split log-determinant estimation into an exact
low-rank part plus a better-conditioned stochastic remainder.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .operators import NumericalError
from .rng import stream

__all__ = [
    "NystromPreconditioner",
    "WhitenedPreconditioner",
    "nystrom_preconditioner",
]


@dataclass
class NystromPreconditioner:
    """Factored approximation U diag(lam) U^T + shift * (I - U U^T) + shift * U U^T.

    Equivalently P = U diag(lam + shift) U^T + shift * (I - U U^T).
    ``basis`` may have fewer columns than the requested rank (sketch rank
    deficiency) or none at all (operator equals shift * I exactly).
    """

    basis: np.ndarray
    eigenvalues: np.ndarray
    shift: float

    @property
    def m(self):
        return self.basis.shape[0]

    @property
    def rank(self):
        return self.basis.shape[1]

    def _split(self, v):
        coeff = self.basis.T @ v
        return coeff, v - self.basis @ coeff

    def apply_inverse(self, v):
        v = np.asarray(v, dtype=float)
        if self.rank == 0:
            return v / self.shift
        coeff, resid = self._split(v)
        return self.basis @ (coeff / (self.eigenvalues + self.shift)) + resid / self.shift

    def apply_inverse_sqrt(self, v):
        v = np.asarray(v, dtype=float)
        if self.rank == 0:
            return v / np.sqrt(self.shift)
        coeff, resid = self._split(v)
        return self.basis @ (coeff / np.sqrt(self.eigenvalues + self.shift)) + resid / np.sqrt(
            self.shift
        )

    def logdet_of_approximation(self):
        """log det P = sum log(lam_i + shift) + (m - rank) * log(shift)."""
        return float(
            np.sum(np.log(self.eigenvalues + self.shift))
            + (self.m - self.rank) * np.log(self.shift)
        )

    # The symmetric factor G = P^{-1/2} satisfies G^T G = P^{-1}; exposing it
    # under the factor interface lets callers treat symmetric and whitened
    # preconditioners uniformly.
    def factor_apply(self, v):
        return self.apply_inverse_sqrt(v)

    def factor_t_apply(self, v):
        return self.apply_inverse_sqrt(v)

    def dense(self):
        eye = np.eye(self.m)
        if self.rank == 0:
            return self.shift * eye
        u = self.basis
        return u @ np.diag(self.eigenvalues) @ u.T + self.shift * eye


@dataclass
class WhitenedPreconditioner:
    """Preconditioner for Psi with a non-scalar noise covariance R.

    The operator is symmetrically whitened first:  H = R^{-1/2} Psi R^{-1/2}
    = (whitened A) Q (whitened A)^T + I, which has the unit shift the Nystrom
    construction wants.  ``inner`` preconditions H; ``white_op`` is the R
    operator (must expose ``apply_inverse_sqrt`` and ``logdet``).

    The factor G = P_H^{-1/2} R^{-1/2} is non-symmetric but satisfies
    G^T G = P^{-1} with P = R^{1/2} P_H R^{1/2}, which is all the
    split log-determinant and the symmetrized trace estimator require.
    """

    inner: NystromPreconditioner
    white_op: object

    @property
    def m(self):
        return self.inner.m

    def apply_inverse(self, v):
        w = self.white_op.apply_inverse_sqrt(np.asarray(v, dtype=float))
        return self.white_op.apply_inverse_sqrt(self.inner.apply_inverse(w))

    def factor_apply(self, v):
        return self.inner.apply_inverse_sqrt(
            self.white_op.apply_inverse_sqrt(np.asarray(v, dtype=float))
        )

    def factor_t_apply(self, v):
        return self.white_op.apply_inverse_sqrt(
            self.inner.apply_inverse_sqrt(np.asarray(v, dtype=float))
        )

    def logdet_of_approximation(self):
        return self.white_op.logdet() + self.inner.logdet_of_approximation()


def nystrom_preconditioner(op, shift, rank, seed):
    """Sketch ``op - shift * I`` and build a :class:`NystromPreconditioner`.

    Follows the numerically stabilized single-pass recipe: Gaussian test
    matrix, thin QR, a small stabilizing shift ``nu`` proportional to machine
    epsilon times the sketch norm, Cholesky of the core matrix, triangular
    solve, thin SVD.  Eigenvalue estimates are clipped at zero after the
    ``nu`` shift is removed.

    Parameters
    ----------
    op : SymOp
        SPD operator to precondition (must dominate ``shift * I``).
    shift : float
        The known identity shift mu; must be positive.
    rank : int
        Sketch rank (columns of the test matrix), 1 <= rank <= m.
    seed : int
        Seed for the Gaussian test matrix.
    """
    if shift <= 0.0:
        raise ValueError("shift must be positive")
    m = op.m
    rank = int(rank)
    if not 1 <= rank <= m:
        raise ValueError(f"rank must satisfy 1 <= rank <= {m}, got {rank}")

    rng = stream(seed, "nystrom")
    omega = rng.standard_normal((m, rank))
    omega, _ = np.linalg.qr(omega)

    sketch = op.matmat(omega) - shift * omega
    sketch_norm = float(np.linalg.norm(sketch))
    if sketch_norm <= m * np.finfo(float).eps * abs(shift):
        # operator is shift * I to working precision: empty factor
        return NystromPreconditioner(
            basis=np.zeros((m, 0)), eigenvalues=np.zeros(0), shift=float(shift)
        )

    nu = np.sqrt(m) * np.finfo(float).eps * sketch_norm
    for attempt in range(4):
        shifted = sketch + nu * omega
        core = omega.T @ shifted
        core = 0.5 * (core + core.T)
        try:
            chol = np.linalg.cholesky(core)
        except np.linalg.LinAlgError:
            nu *= 100.0
            continue
        b = scipy.linalg.solve_triangular(chol, shifted.T, lower=True).T
        u, svals, _ = np.linalg.svd(b, full_matrices=False)
        eigenvalues = np.maximum(svals**2 - nu, 0.0)
        return NystromPreconditioner(
            basis=u, eigenvalues=eigenvalues, shift=float(shift)
        )
    raise NumericalError(
        "Nystrom core matrix is not positive semidefinite; the operator does "
        f"not dominate shift * I (shift={shift:.6e})"
    )
