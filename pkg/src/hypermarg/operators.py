"""Linear operators with thread-safe application counters.

Everything upstream (trace estimators, solvers, optimizers) talks to matrices
only through the operator classes here, so the per-run cost ledger is exact by
construction: each symmetric operator application and each rectangular
operator application (forward or adjoint) bumps a counter.  Counters may be
shared between operators — a forward map and its derivative built for the same
problem can report into one ledger or into separate ones, at the builder's
choice.

Dense materialization (``dense()``) is an oracle path for small problems and
never touches the counters.
"""

import threading

import numpy as np
import scipy.linalg

__all__ = [
    "DENSE_LIMIT",
    "NumericalError",
    "MatvecCounter",
    "SymOp",
    "DenseSymOp",
    "DiagonalOp",
    "ScaledIdentityOp",
    "CallableSymOp",
    "ShiftedSymOp",
    "LinOp",
    "DenseLinOp",
    "SparseLinOp",
    "ZeroLinOp",
    "IdentityLinOp",
    "dense_logdet",
]

# Largest dimension for which dense materialization / dense factorizations
# are considered acceptable.
DENSE_LIMIT = 2048


class NumericalError(RuntimeError):
    """A numerical operation failed (non-PD pivot, non-PD Ritz value, ...).

    Distinct from ``ValueError``, which signals a caller mistake; this one
    signals that the math went bad at runtime.  The command-line driver maps
    it to exit code 3.
    """


class MatvecCounter:
    """Thread-safe event counter shared between operators."""

    __slots__ = ("_count", "_lock")

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def increment(self, k=1):
        with self._lock:
            self._count += k

    @property
    def count(self):
        return self._count

    def __repr__(self):
        return f"MatvecCounter({self._count})"


def _as_vector(v, n, name="v"):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {v.shape}")
    return v


class SymOp:
    """Symmetric linear operator on R^m.

    Subclasses implement ``_apply``; ``matvec`` wraps it with counting.
    """

    def __init__(self, m, counter=None):
        if m < 1:
            raise ValueError("operator dimension must be positive")
        self.m = int(m)
        self.counter = counter if counter is not None else MatvecCounter()

    @property
    def shape(self):
        return (self.m, self.m)

    def matvec(self, v):
        self.counter.increment()
        return self._apply(_as_vector(v, self.m))

    def matmat(self, V):
        """Apply to each column of ``V`` (counts one matvec per column)."""
        V = np.asarray(V, dtype=float)
        if V.ndim != 2 or V.shape[0] != self.m:
            raise ValueError(f"V must have shape ({self.m}, k)")
        self.counter.increment(V.shape[1])
        return self._apply_mat(V)

    def _apply(self, v):
        raise NotImplementedError

    def _apply_mat(self, V):
        return np.column_stack([self._apply(V[:, j]) for j in range(V.shape[1])])

    def dense(self):
        """Exact dense materialization (oracle path; does not count)."""
        raise NotImplementedError(f"{type(self).__name__} has no dense form")

    @property
    def matvec_count(self):
        return self.counter.count


class DenseSymOp(SymOp):
    """Symmetric operator backed by an explicit array."""

    def __init__(self, mat, counter=None):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(mat).max())):
            raise ValueError("matrix must be symmetric")
        super().__init__(mat.shape[0], counter)
        self.mat = 0.5 * (mat + mat.T)

    def _apply(self, v):
        return self.mat @ v

    def _apply_mat(self, V):
        return self.mat @ V

    def dense(self):
        return self.mat.copy()


class DiagonalOp(SymOp):
    """Diagonal operator; supports inverse and inverse square root when PD."""

    def __init__(self, diag, counter=None):
        diag = np.asarray(diag, dtype=float)
        if diag.ndim != 1:
            raise ValueError("diag must be one-dimensional")
        super().__init__(diag.shape[0], counter)
        self.diag = diag.copy()

    def _apply(self, v):
        return self.diag * v

    def _apply_mat(self, V):
        return self.diag[:, None] * V

    def dense(self):
        return np.diag(self.diag)

    def _require_pd(self):
        if np.any(self.diag <= 0.0):
            raise NumericalError("diagonal operator is not positive definite")

    def apply_inverse(self, v):
        self._require_pd()
        return _as_vector(v, self.m) / self.diag

    def apply_inverse_sqrt(self, v):
        self._require_pd()
        return _as_vector(v, self.m) / np.sqrt(self.diag)

    def logdet(self):
        self._require_pd()
        return float(np.sum(np.log(self.diag)))


class ScaledIdentityOp(SymOp):
    """c * I on R^m."""

    def __init__(self, scale, m, counter=None):
        super().__init__(m, counter)
        self.scale = float(scale)

    def _apply(self, v):
        return self.scale * v

    def _apply_mat(self, V):
        return self.scale * V

    def dense(self):
        return self.scale * np.eye(self.m)

    def _require_pd(self):
        if self.scale <= 0.0:
            raise NumericalError("scaled identity is not positive definite")

    def apply_inverse(self, v):
        self._require_pd()
        return _as_vector(v, self.m) / self.scale

    def apply_inverse_sqrt(self, v):
        self._require_pd()
        return _as_vector(v, self.m) / np.sqrt(self.scale)

    def logdet(self):
        self._require_pd()
        return self.m * float(np.log(self.scale))


class CallableSymOp(SymOp):
    """Symmetric operator defined by a user callable v -> Mv."""

    def __init__(self, m, fn, counter=None):
        super().__init__(m, counter)
        self._fn = fn

    def _apply(self, v):
        return np.asarray(self._fn(v), dtype=float)


class ShiftedSymOp(SymOp):
    """base + shift * I, sharing the base operator's counter semantics."""

    def __init__(self, base, shift):
        super().__init__(base.m, base.counter)
        self.base = base
        self.shift = float(shift)

    def _apply(self, v):
        # count once on the shared counter (the base application is the cost)
        return self.base._apply(v) + self.shift * v

    def _apply_mat(self, V):
        return self.base._apply_mat(V) + self.shift * V

    def dense(self):
        return self.base.dense() + self.shift * np.eye(self.m)


class LinOp:
    """Rectangular operator R^n -> R^m with adjoint.

    Forward and adjoint applications increment the same counter: the cost
    ledger tracks "applications of the map or its transpose".
    """

    def __init__(self, m, n, counter=None):
        if m < 1 or n < 1:
            raise ValueError("operator dimensions must be positive")
        self.m = int(m)
        self.n = int(n)
        self.counter = counter if counter is not None else MatvecCounter()

    @property
    def shape(self):
        return (self.m, self.n)

    def matvec(self, x):
        self.counter.increment()
        return self._apply(_as_vector(x, self.n, "x"))

    def rmatvec(self, y):
        self.counter.increment()
        return self._apply_t(_as_vector(y, self.m, "y"))

    def _apply(self, x):
        raise NotImplementedError

    def _apply_t(self, y):
        raise NotImplementedError

    def dense(self):
        raise NotImplementedError(f"{type(self).__name__} has no dense form")

    @property
    def matvec_count(self):
        return self.counter.count


class DenseLinOp(LinOp):
    def __init__(self, mat, counter=None):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        super().__init__(mat.shape[0], mat.shape[1], counter)
        self.mat = mat.copy()

    def _apply(self, x):
        return self.mat @ x

    def _apply_t(self, y):
        return self.mat.T @ y

    def dense(self):
        return self.mat.copy()


class SparseLinOp(LinOp):
    def __init__(self, mat, counter=None):
        super().__init__(mat.shape[0], mat.shape[1], counter)
        self.mat = mat.tocsr()

    def _apply(self, x):
        return np.asarray(self.mat @ x)

    def _apply_t(self, y):
        return np.asarray(self.mat.T @ y)

    def dense(self):
        return self.mat.toarray()


class ZeroLinOp(LinOp):
    def _apply(self, x):
        return np.zeros(self.m)

    def _apply_t(self, y):
        return np.zeros(self.n)

    def dense(self):
        return np.zeros((self.m, self.n))


class IdentityLinOp(LinOp):
    """Identity on R^m, counted like any other forward map."""

    def __init__(self, m, counter=None):
        super().__init__(m, m, counter)

    def _apply(self, x):
        return x.copy()

    def _apply_t(self, y):
        return y.copy()

    def dense(self):
        return np.eye(self.m)


def dense_logdet(mat):
    """log det of a dense SPD matrix via Cholesky (LAPACK ``dpotrf``).

    Raises
    ------
    NumericalError
        If the factorization fails; the message names the failed pivot
        index (1-based, as reported by LAPACK).
    ValueError
        If the matrix is not square or exceeds the dense limit.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    if mat.shape[0] > DENSE_LIMIT:
        raise ValueError(f"matrix order {mat.shape[0]} exceeds dense limit {DENSE_LIMIT}")
    chol, info = scipy.linalg.lapack.dpotrf(mat, lower=1)
    if info > 0:
        raise NumericalError(
            f"Cholesky factorization failed: leading minor of order {info} "
            f"is not positive definite (pivot {info})"
        )
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    return 2.0 * float(np.sum(np.log(np.diag(chol))))
