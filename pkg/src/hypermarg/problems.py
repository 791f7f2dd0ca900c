"""Desk-scale test problems: deblurring, ray tomography, super-resolution.

Each factory returns a fully wired :class:`~hypermarg.model.ProblemSpec` with
synthetic data drawn from the model itself at a known ``theta_true``, so
estimator output can be scored against ground truth.  All three fit the same
template — only which pieces depend on which hyperparameters changes:

==============  =======================  =========================  =========
problem         noise / prior (psi)      forward map (y)            p
==============  =======================  =========================  =========
deblur          R = psi1 I, Q = psi2 I   parametric PSF (3 params)  5
tomo            R = th1 I, Matern Q      fixed ray sums             3
superres        fixed R, fixed Q         per-frame shifts           2*frames
==============  =======================  =========================  =========

Forward maps apply as stencil/gather arithmetic (never assembled for the
solvers); ``dense()`` materializations exist for the dense oracle paths.
"""

import numpy as np
import scipy.sparse

from .kernels import matern_covariance, matern_dlengthscale, matern_kernel, pairwise_distances
from .model import Box, CounterLedger, HyperPrior, ProblemSpec, synthesize_data
from .operators import (
    DenseSymOp,
    IdentityLinOp,
    LinOp,
    MatvecCounter,
    ScaledIdentityOp,
    SparseLinOp,
)
from .rng import stream

__all__ = [
    "phantom_image",
    "psf_stencil",
    "psf_stencil_derivative",
    "ConvolutionOp",
    "ray_matrix",
    "identity_problem",
    "deblur_problem",
    "tomo_problem",
    "superres_problem",
    "make_test_problem",
]


def phantom_image(s):
    """Smooth test image on an s x s grid, values O(1)."""
    u = (np.arange(s) + 0.5) / s
    uu, vv = np.meshgrid(u, u, indexing="ij")
    img = (
        1.2 * np.exp(-((uu - 0.35) ** 2 + (vv - 0.4) ** 2) / 0.03)
        + 0.8 * np.exp(-((uu - 0.72) ** 2 + (vv - 0.68) ** 2) / 0.015)
        + 0.45 * np.exp(-((uu - 0.25) ** 2 + (vv - 0.78) ** 2) / 0.02)
    )
    return img


# ---------------------------------------------------------------------------
# deblurring: parametric anisotropic Gaussian PSF
# ---------------------------------------------------------------------------


def _psf_quadform_parts(halfwidth):
    off = np.arange(-halfwidth, halfwidth + 1)
    di, dj = np.meshgrid(off, off, indexing="ij")
    return di.astype(float), dj.astype(float)


def psf_stencil(y, halfwidth=3):
    """PSF weights p(di, dj) = exp(-(1/2) [(l1 di + l2 dj)^2 + (l3 dj)^2]).

    Unnormalized — the center weight is always 1, so large l1, l3 collapse
    the stencil to the identity.
    """
    l1, l2, l3 = (float(v) for v in y)
    di, dj = _psf_quadform_parts(halfwidth)
    quad = (l1 * di + l2 * dj) ** 2 + (l3 * dj) ** 2
    return np.exp(-0.5 * quad)


def psf_stencil_derivative(y, j, halfwidth=3):
    """d stencil / d y_j for j in {0: l1, 1: l2, 2: l3}."""
    l1, l2, l3 = (float(v) for v in y)
    di, dj = _psf_quadform_parts(halfwidth)
    p = psf_stencil(y, halfwidth)
    if j == 0:
        dquad = 2.0 * (l1 * di + l2 * dj) * di
    elif j == 1:
        dquad = 2.0 * (l1 * di + l2 * dj) * dj
    elif j == 2:
        dquad = 2.0 * l3 * dj**2
    else:
        raise ValueError(f"PSF parameter index must be 0, 1 or 2, got {j}")
    return -0.5 * dquad * p


def _offset_add(dst, src, di, dj, w):
    # dst(i, j) += w * src(i + di, j + dj), zero outside
    s = dst.shape[0]
    i0, i1 = max(0, -di), min(s, s - di)
    j0, j1 = max(0, -dj), min(s, s - dj)
    if i0 >= i1 or j0 >= j1:
        return
    dst[i0:i1, j0:j1] += w * src[i0 + di : i1 + di, j0 + dj : j1 + dj]


class ConvolutionOp(LinOp):
    """Zero-padded stencil correlation on s x s images (square, n = s^2).

    Forward: out(i,j) = sum_{di,dj} stencil(di,dj) x(i+di, j+dj).
    """

    def __init__(self, stencil, s, counter=None):
        super().__init__(s * s, s * s, counter)
        stencil = np.asarray(stencil, dtype=float)
        if stencil.ndim != 2 or stencil.shape[0] != stencil.shape[1] or stencil.shape[0] % 2 == 0:
            raise ValueError("stencil must be square with odd side")
        self.s = int(s)
        self.stencil = stencil
        self.halfwidth = stencil.shape[0] // 2

    def _conv(self, x, flip):
        img = x.reshape(self.s, self.s)
        out = np.zeros_like(img)
        hw = self.halfwidth
        for a in range(self.stencil.shape[0]):
            for b in range(self.stencil.shape[1]):
                w = self.stencil[a, b]
                if w == 0.0:
                    continue
                di, dj = a - hw, b - hw
                if flip:
                    di, dj = -di, -dj
                _offset_add(out, img, di, dj, w)
        return out.ravel()

    def _apply(self, x):
        return self._conv(x, flip=False)

    def _apply_t(self, y):
        return self._conv(y, flip=True)

    def dense(self):
        s, hw = self.s, self.halfwidth
        rows, cols, vals = [], [], []
        idx = np.arange(s)
        for a in range(self.stencil.shape[0]):
            for b in range(self.stencil.shape[1]):
                w = self.stencil[a, b]
                if w == 0.0:
                    continue
                di, dj = a - hw, b - hw
                ii = idx[(idx + di >= 0) & (idx + di < s)]
                jj = idx[(idx + dj >= 0) & (idx + dj < s)]
                if ii.size == 0 or jj.size == 0:
                    continue
                gi, gj = np.meshgrid(ii, jj, indexing="ij")
                rows.append((gi * s + gj).ravel())
                cols.append(((gi + di) * s + (gj + dj)).ravel())
                vals.append(np.full(gi.size, w))
        mat = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )
        return mat.toarray()


def deblur_problem(
    s=16,
    noise_level=0.05,
    seed=0,
    halfwidth=3,
    theta_true=None,
    box=None,
):
    """Image deblurring with unknown noise/prior variances and PSF shape.

    theta = (psi1, psi2, l1, l2, l3):  R = psi1 I,  Q = psi2 I,  A = A(l).
    """
    n = m = s * s
    x_true = phantom_image(s).ravel()

    if theta_true is None:
        y_true = np.array([1.0, 0.3, 0.8])
    else:
        theta_true = np.asarray(theta_true, dtype=float)
        y_true = theta_true[2:]

    ledger = CounterLedger()

    def make_a(y, counter):
        return ConvolutionOp(psf_stencil(y, halfwidth), s, counter)

    a_true = make_a(y_true, MatvecCounter())
    b, noise_var = synthesize_data(a_true, x_true, noise_level, seed)

    if theta_true is None:
        theta_true = np.concatenate([[noise_var, 1.0], y_true])

    if box is None:
        box = Box(
            lower=np.array([1e-6, 1e-2, 0.3, -1.0, 0.3]),
            upper=np.array([1.0, 10.0, 2.5, 1.0, 2.5]),
        )

    prior = HyperPrior(
        (("gamma", 1e-4), ("gamma", 1e-4), ("uniform",), ("uniform",), ("uniform",))
    )

    def a_builder(y):
        return make_a(y, ledger.a)

    def q_builder(psi):
        return ScaledIdentityOp(psi[1], n, ledger.q)

    def r_builder(psi):
        return ScaledIdentityOp(psi[0], m, ledger.r)

    def dr_dpsi1(psi):
        return ScaledIdentityOp(1.0, m, MatvecCounter())

    def dq_dpsi2(psi):
        return ScaledIdentityOp(1.0, n, MatvecCounter())

    def make_da(j):
        def da(y):
            return ConvolutionOp(psf_stencil_derivative(y, j, halfwidth), s, MatvecCounter())

        return da

    return ProblemSpec(
        name="deblur",
        n=n,
        m=m,
        q_dim=2,
        ell=3,
        mu_x=np.zeros(n),
        b=b,
        box=box,
        prior=prior,
        a_builder=a_builder,
        q_builder=q_builder,
        r_builder=r_builder,
        da_builders=tuple(make_da(j) for j in range(3)),
        dq_builders=(None, dq_dpsi2),
        dr_builders=(dr_dpsi1, None),
        x_true=x_true,
        theta_true=theta_true,
        counters=ledger,
        meta={"s": s, "halfwidth": halfwidth, "noise_level": noise_level, "seed": seed},
    )


# ---------------------------------------------------------------------------
# tomography: fixed straight rays through a unit-square pixel grid
# ---------------------------------------------------------------------------


def ray_matrix(s, n_src, n_rec):
    """Sparse ray-sum matrix: sources on the left edge, receivers on the right.

    Entry (ray, cell) is the length of the intersection of the straight ray
    with the cell, so each row sums to the total ray length.
    Cells are indexed ix * s + iy with center ((ix+0.5)/s, (iy+0.5)/s).
    """
    rows, cols, vals = [], [], []
    for si in range(n_src):
        ys = (si + 0.5) / n_src
        for rj in range(n_rec):
            yr = (rj + 0.5) / n_rec
            dy = yr - ys
            # ray point at parameter t: (t, ys + t * dy), t in [0, 1]
            crossings = {0.0, 1.0}
            crossings.update(i / s for i in range(1, s))
            if dy != 0.0:
                for j in range(1, s):
                    t = (j / s - ys) / dy
                    if 0.0 < t < 1.0:
                        crossings.add(t)
            ts = sorted(crossings)
            length = float(np.hypot(1.0, dy))
            ray = si * n_rec + rj
            for t0, t1 in zip(ts[:-1], ts[1:]):
                if t1 - t0 <= 1e-14:
                    continue
                tm = 0.5 * (t0 + t1)
                ix = min(int(tm * s), s - 1)
                iy = min(int((ys + tm * dy) * s), s - 1)
                rows.append(ray)
                cols.append(ix * s + iy)
                vals.append((t1 - t0) * length)
    return scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n_src * n_rec, s * s)
    )


def tomo_problem(
    s=8,
    n_src=8,
    n_rec=9,
    noise_level=0.05,
    seed=0,
    nu=0.5,
    theta_true=None,
    box=None,
):
    """Ray tomography with unknown noise variance and Matern prior parameters.

    theta = (th1, th2, th3):  R = th1 I,  Q = Matern(amplitude th2,
    lengthscale th3),  A fixed.  The ground-truth field is drawn from the
    Matern prior at (th2, th3)_true, and th1_true is the synthetic noise
    variance, so theta_true is exactly the parameter the model "should" find.
    """
    n = s * s
    m = n_src * n_rec

    if theta_true is None:
        amp_true, len_true = 0.8, 0.25
    else:
        theta_true = np.asarray(theta_true, dtype=float)
        amp_true, len_true = theta_true[1], theta_true[2]

    centers = np.array([((i + 0.5) / s, (j + 0.5) / s) for i in range(s) for j in range(s)])
    dists = pairwise_distances(centers)

    cov_true = matern_covariance(dists, amp_true, len_true, nu)
    chol = np.linalg.cholesky(cov_true)
    x_true = chol @ stream(seed, "xtrue").standard_normal(n)

    ledger = CounterLedger()
    a_mat = ray_matrix(s, n_src, n_rec)
    a_quiet = SparseLinOp(a_mat, MatvecCounter())
    b, noise_var = synthesize_data(a_quiet, x_true, noise_level, seed)

    if theta_true is None:
        theta_true = np.array([noise_var, amp_true, len_true])

    if box is None:
        box = Box(
            lower=np.array([1e-5, 0.05, 0.05]),
            upper=np.array([1.0, 2.0, 1.0]),
        )

    a_shared = SparseLinOp(a_mat, ledger.a)

    def a_builder(y):
        return a_shared

    def q_builder(psi):
        return DenseSymOp(matern_covariance(dists, psi[1], psi[2], nu), ledger.q)

    def r_builder(psi):
        return ScaledIdentityOp(psi[0], m, ledger.r)

    def dr_dth1(psi):
        return ScaledIdentityOp(1.0, m, MatvecCounter())

    def dq_dth2(psi):
        # Q scales as th2^2 (jitter included), so dQ/dth2 = 2 Q / th2
        return DenseSymOp(
            (2.0 / psi[1]) * matern_covariance(dists, psi[1], psi[2], nu),
            MatvecCounter(),
        )

    def dq_dth3(psi):
        return DenseSymOp(matern_dlengthscale(dists, psi[1], psi[2], nu), MatvecCounter())

    return ProblemSpec(
        name="tomo",
        n=n,
        m=m,
        q_dim=3,
        ell=0,
        mu_x=np.zeros(n),
        b=b,
        box=box,
        prior=HyperPrior.gamma(1e-4, 3),
        a_builder=a_builder,
        q_builder=q_builder,
        r_builder=r_builder,
        da_builders=(),
        dq_builders=(None, dq_dth2, dq_dth3),
        dr_builders=(dr_dth1, None, None),
        x_true=x_true,
        theta_true=theta_true,
        counters=ledger,
        meta={
            "s": s,
            "n_src": n_src,
            "n_rec": n_rec,
            "nu": nu,
            "noise_level": noise_level,
            "seed": seed,
            "centers": centers,
        },
    )


# ---------------------------------------------------------------------------
# super-resolution: decimated, translated frames of one image
# ---------------------------------------------------------------------------


class _GatherTables:
    """Bilinear gather index/weight tables for fixed sample positions."""

    def __init__(self, pos_r, pos_c, s):
        self.s = s
        r0 = np.floor(pos_r).astype(int)
        c0 = np.floor(pos_c).astype(int)
        fr = pos_r - r0
        fc = pos_c - c0
        self.idx = []
        self.w = []
        self.dw_r = []
        self.dw_c = []
        for a, (war, dwar) in enumerate((((1.0 - fr), -1.0), (fr, 1.0))):
            for b, (wbc, dwbc) in enumerate((((1.0 - fc), -1.0), (fc, 1.0))):
                rows = r0 + a
                cols = c0 + b
                valid = (rows >= 0) & (rows < s) & (cols >= 0) & (cols < s)
                flat = np.where(valid, rows * s + cols, 0).ravel()
                v = valid.ravel().astype(float)
                self.idx.append(flat)
                self.w.append((war * wbc).ravel() * v)
                self.dw_r.append((dwar * wbc).ravel() * v)
                self.dw_c.append((war * dwbc).ravel() * v)

    def gather(self, x_flat, weights):
        out = np.zeros(weights[0].shape[0])
        for idx, w in zip(self.idx, weights):
            out += w * x_flat[idx]
        return out

    def scatter(self, y_flat, weights, n):
        acc = np.zeros(n)
        for idx, w in zip(self.idx, weights):
            np.add.at(acc, idx, w * y_flat)
        return acc

    def dense(self, weights, n):
        rows = np.tile(np.arange(weights[0].shape[0]), len(self.idx))
        cols = np.concatenate(self.idx)
        vals = np.concatenate(weights)
        return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(weights[0].shape[0], n)).toarray()


def _frame_positions(s, params, affine):
    """Sample-position fields (pos_r, pos_c) for one frame's warp.

    Translation: pos = pixel - (ty, tx).  Affine adds a linear distortion
    about the image center: pos = ctr + (I + A)(pixel - ctr) - (ty, tx) with
    params (tx, ty, a11, a12, a21, a22).
    """
    r = np.arange(s, dtype=float)
    rr, cc = np.meshgrid(r, r, indexing="ij")
    if not affine:
        tx, ty = params
        return rr - ty, cc - tx
    tx, ty, a11, a12, a21, a22 = params
    ctr = 0.5 * (s - 1)
    dr, dc = rr - ctr, cc - ctr
    pos_r = ctr + (1.0 + a11) * dr + a12 * dc - ty
    pos_c = ctr + a21 * dr + (1.0 + a22) * dc - tx
    return pos_r, pos_c


def _position_sensitivity(s, j_local, affine):
    """(d pos_r / d param, d pos_c / d param) fields for one frame parameter."""
    shape = (s, s)
    zeros = np.zeros(shape)
    if j_local == 0:  # tx
        return zeros, np.full(shape, -1.0)
    if j_local == 1:  # ty
        return np.full(shape, -1.0), zeros
    if not affine:
        raise ValueError("translation frames have two parameters")
    r = np.arange(s, dtype=float)
    rr, cc = np.meshgrid(r, r, indexing="ij")
    ctr = 0.5 * (s - 1)
    dr, dc = rr - ctr, cc - ctr
    if j_local == 2:  # a11
        return dr, zeros
    if j_local == 3:  # a12
        return dc, zeros
    if j_local == 4:  # a21
        return zeros, dr
    if j_local == 5:  # a22
        return zeros, dc
    raise ValueError(f"bad frame-parameter index {j_local}")


def _decimate(img, d):
    cs = img.shape[0] // d
    return img.reshape(cs, d, cs, d).mean(axis=(1, 3))


def _decimate_adjoint(coarse, d):
    return np.repeat(np.repeat(coarse, d, axis=0), d, axis=1) / d**2


class SuperresOp(LinOp):
    """Stacked observation operator [D; D S(t_1); ...; D S(t_F)].

    D is block-average decimation by factor d; S(t) is a zero-padded bilinear
    warp (pure translation by default, optionally affine).  S(0) = I exactly.
    """

    def __init__(self, s, d, frame_params, affine=False, counter=None):
        if s % d != 0:
            raise ValueError("decimation must divide the image side")
        cs = s // d
        frames = len(frame_params)
        super().__init__((frames + 1) * cs * cs, s * s, counter)
        self.s, self.d, self.cs = s, d, cs
        self.affine = bool(affine)
        self.frame_params = [np.asarray(p, dtype=float) for p in frame_params]
        self.tables = [
            _GatherTables(*_frame_positions(s, p, self.affine), s)
            for p in self.frame_params
        ]

    def _apply(self, x):
        img = x.reshape(self.s, self.s)
        parts = [_decimate(img, self.d).ravel()]
        for tab in self.tables:
            shifted = tab.gather(x, tab.w).reshape(self.s, self.s)
            parts.append(_decimate(shifted, self.d).ravel())
        return np.concatenate(parts)

    def _apply_t(self, y):
        blocks = y.reshape(len(self.tables) + 1, self.cs, self.cs)
        acc = _decimate_adjoint(blocks[0], self.d).ravel()
        for tab, block in zip(self.tables, blocks[1:]):
            up = _decimate_adjoint(block, self.d).ravel()
            acc += tab.scatter(up, tab.w, self.n)
        return acc

    def _decimation_dense(self):
        rows, cols, vals = [], [], []
        for bi in range(self.cs):
            for bj in range(self.cs):
                row = bi * self.cs + bj
                for oi in range(self.d):
                    for oj in range(self.d):
                        rows.append(row)
                        cols.append((bi * self.d + oi) * self.s + (bj * self.d + oj))
                        vals.append(1.0 / self.d**2)
        return scipy.sparse.coo_matrix(
            (vals, (rows, cols)), shape=(self.cs * self.cs, self.n)
        ).toarray()

    def dense(self):
        dec = self._decimation_dense()
        blocks = [dec]
        for tab in self.tables:
            blocks.append(dec @ tab.dense(tab.w, self.n))
        return np.vstack(blocks)


class SuperresDerivOp(LinOp):
    """Derivative of :class:`SuperresOp` with respect to one warp parameter.

    Chain rule through the sample positions: d out / d param
    = (d pos_r/d param) .* (gather with d-weights/d pos_r)
    + (d pos_c/d param) .* (gather with d-weights/d pos_c),
    then decimated into the owning frame's block (all other blocks zero).
    """

    def __init__(self, base, frame, j_local, counter=None):
        super().__init__(base.m, base.n, counter)
        self.base = base
        self.frame = frame
        self.g_r, self.g_c = (
            f.ravel() for f in _position_sensitivity(base.s, j_local, base.affine)
        )

    def _warp_deriv(self, x):
        tab = self.base.tables[self.frame]
        return self.g_r * tab.gather(x, tab.dw_r) + self.g_c * tab.gather(x, tab.dw_c)

    def _apply(self, x):
        base = self.base
        out = np.zeros(self.m)
        cs2 = base.cs * base.cs
        start = (self.frame + 1) * cs2
        deriv = self._warp_deriv(x).reshape(base.s, base.s)
        out[start : start + cs2] = _decimate(deriv, base.d).ravel()
        return out

    def _apply_t(self, y):
        base = self.base
        tab = base.tables[self.frame]
        cs2 = base.cs * base.cs
        start = (self.frame + 1) * cs2
        block = y[start : start + cs2].reshape(base.cs, base.cs)
        up = _decimate_adjoint(block, base.d).ravel()
        return tab.scatter(self.g_r * up, tab.dw_r, self.n) + tab.scatter(
            self.g_c * up, tab.dw_c, self.n
        )

    def dense(self):
        return np.column_stack([self._apply(col) for col in np.eye(self.n)])


def superres_problem(
    s=16,
    decim=2,
    frames=2,
    noise_level=0.05,
    seed=0,
    shift_max=0.2,
    prior_var=1.0,
    affine=False,
    theta_true=None,
    box=None,
):
    """Multi-frame super-resolution with unknown inter-frame motion.

    theta stacks per-frame warp parameters — (tx, ty) per frame by default,
    (tx, ty, a11, a12, a21, a22) with ``affine=True``.  Q = prior_var * I and
    R (the true synthetic noise variance) are fixed, so only the forward map
    varies with theta.
    """
    n = s * s
    per_frame = 6 if affine else 2
    ell = per_frame * frames

    if theta_true is None:
        rng = stream(seed, "shifts")
        theta_true = 0.7 * shift_max * (2.0 * rng.random(ell) - 1.0)
        if affine:
            # keep linear-distortion entries an order smaller than the shifts
            for f in range(frames):
                theta_true[per_frame * f + 2 : per_frame * (f + 1)] *= 0.25
    else:
        theta_true = np.asarray(theta_true, dtype=float)

    x_true = phantom_image(s).ravel()
    ledger = CounterLedger()

    def make_a(y, counter):
        params = [y[per_frame * f : per_frame * (f + 1)] for f in range(frames)]
        return SuperresOp(s, decim, params, affine=affine, counter=counter)

    a_true = make_a(theta_true, MatvecCounter())
    b, noise_var = synthesize_data(a_true, x_true, noise_level, seed)
    m = a_true.m

    if box is None:
        bound = np.full(ell, shift_max)
        if affine:
            for f in range(frames):
                bound[per_frame * f + 2 : per_frame * (f + 1)] = 0.5 * shift_max
        box = Box(lower=-bound, upper=bound)

    def a_builder(y):
        return make_a(y, ledger.a)

    def q_builder(psi):
        return ScaledIdentityOp(prior_var, n, ledger.q)

    def r_builder(psi):
        return ScaledIdentityOp(noise_var, m, ledger.r)

    def make_da(j):
        frame, j_local = divmod(j, per_frame)

        def da(y):
            return SuperresDerivOp(make_a(y, MatvecCounter()), frame, j_local, MatvecCounter())

        return da

    return ProblemSpec(
        name="superres",
        n=n,
        m=m,
        q_dim=0,
        ell=ell,
        mu_x=np.zeros(n),
        b=b,
        box=box,
        prior=HyperPrior.gaussian(0.0, 1.0, ell),
        a_builder=a_builder,
        q_builder=q_builder,
        r_builder=r_builder,
        da_builders=tuple(make_da(j) for j in range(ell)),
        dq_builders=(),
        dr_builders=(),
        x_true=x_true,
        theta_true=theta_true,
        counters=ledger,
        meta={
            "s": s,
            "decim": decim,
            "frames": frames,
            "affine": affine,
            "noise_level": noise_level,
            "seed": seed,
            "prior_var": prior_var,
            "noise_var": noise_var,
        },
    )


def identity_problem(m=64, noise_level=0.05, seed=0, box=None):
    """Direct observation of a white field with unknown noise variance.

    A = I, Q = I fixed, R = th1 I, so Psi = (1 + th1) I and the marginal
    objective has the closed-form minimizer th1* = ||b||^2/m - 1 (up to the
    weak gamma prior).  The synthesized data are rescaled so that equality
    ||b||^2/m = 1 + noise_var holds exactly, which puts the minimizer on
    top of theta_true: starting an optimizer there must terminate almost
    immediately.  The smallest smoke test for the optimize/report pipeline.
    """
    n = m
    x_true = stream(seed, "xtrue").standard_normal(n)

    ledger = CounterLedger()
    a_quiet = IdentityLinOp(m, MatvecCounter())
    b, noise_var = synthesize_data(a_quiet, x_true, noise_level, seed)
    b *= np.sqrt((1.0 + noise_var) * m) / np.linalg.norm(b)
    theta_true = np.array([noise_var])

    if box is None:
        box = Box(lower=np.array([1e-6]), upper=np.array([1.0]))

    a_shared = IdentityLinOp(m, ledger.a)

    def a_builder(y):
        return a_shared

    def q_builder(psi):
        return ScaledIdentityOp(1.0, n, ledger.q)

    def r_builder(psi):
        return ScaledIdentityOp(psi[0], m, ledger.r)

    def dr_dth1(psi):
        return ScaledIdentityOp(1.0, m, MatvecCounter())

    return ProblemSpec(
        name="identity",
        n=n,
        m=m,
        q_dim=1,
        ell=0,
        mu_x=np.zeros(n),
        b=b,
        box=box,
        prior=HyperPrior.gamma(1e-4, 1),
        a_builder=a_builder,
        q_builder=q_builder,
        r_builder=r_builder,
        da_builders=(),
        dq_builders=(None,),
        dr_builders=(dr_dth1,),
        x_true=x_true,
        theta_true=theta_true,
        counters=ledger,
        meta={"noise_level": noise_level, "seed": seed},
    )


def make_test_problem(kind, **kwargs):
    """Build one of the named desk-scale problems."""
    factories = {
        "identity": identity_problem,
        "deblur": deblur_problem,
        "tomo": tomo_problem,
        "superres": superres_problem,
    }
    if kind not in factories:
        raise ValueError(f"unknown problem kind {kind!r}; options: {sorted(factories)}")
    return factories[kind](**kwargs)
