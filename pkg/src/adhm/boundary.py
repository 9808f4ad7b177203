"""Boundary-data transform on the unit ball: S^3 quadrature and solvers.

The finite transform's vector index becomes a function on the unit
3-sphere S.  Data is a quaternion-valued L(y) sampled on a quadrature
grid, together with a symmetric kernel P(y, z); the full operator acting
on v is  (vM)(y) = -v(y) y + integral of v(z) P(z, y).  Everything is
discretized with the grid's native weights (Nystrom), so the linear
system at a point x reads

    v_j (x - y_j) + sum_i w_i v_i P_ij = -L_j ,

which is itself a finite system of the adhm.finite form with
L~_j = sqrt(w_j) L_j and M~ = sqrt(w) P sqrt(w) - diag(y).  The delta
part of the operator is always handled analytically (the -v_j y_j term
and the real y*z delta term in the constraint); only the smooth kernel
is ever integrated numerically.

Separable kernels P(y, z) = sum_t f_t(y) g_t(z) (the closed-form example
is rank 2) are solved by reduction to a small real system in the moments
c_t = sum_i w_i v_i f_t(y_i), so large product grids never materialize an
NxN matrix.
"""

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_chebyu, roots_legendre

from adhm.quat import (
    BASIS, ONE, SingularSystemError, RightSolver,
    qconj, qinv, qmul, qnorm2, right_mul_matrix,
)
from adhm.finite import ADHMData, assemble_potential, thooft_data
from adhm.ansatz import PoleSumHarmonic

VOL_S3 = 2.0 * np.pi ** 2

# Fraction of the grid-spacing scale kept clear of the boundary sphere
# before near-boundary accuracy warnings fire.
MARGIN_FACTOR = 0.3


class AccuracyWarning(UserWarning):
    """Evaluation point too close to S for the quadrature to resolve."""


@dataclass(frozen=True)
class S3Grid:
    """Quadrature nodes (unit quaternions) and positive weights on S^3."""

    nodes: np.ndarray     # (N, 4), |y_j| = 1
    weights: np.ndarray   # (N,), sum ~ 2 pi^2
    scheme: str           # "product" | "mc" | "custom"
    params: tuple = ()

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 4 or nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes must be (N, 4) with matching weights")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.max(np.abs(np.linalg.norm(nodes, axis=1) - 1.0)) > 1e-12:
            raise ValueError("nodes must lie on the unit sphere")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self):
        return self.nodes.shape[0]

    @property
    def spacing_scale(self):
        """Typical node spacing (cube root of volume per node)."""
        return float((VOL_S3 / self.n) ** (1.0 / 3.0))

    def integrate(self, values):
        """Quadrature sum, for scalar (N,) or quaternion (N, 4) samples."""
        values = np.asarray(values, dtype=float)
        return np.einsum("j,j...->...", self.weights, values)


def build_grid(n_psi, n_theta, n_phi):
    """Product quadrature for hyperspherical coordinates on S^3.

    The measure sin^2(psi) sin(theta) dpsi dtheta dphi is handled by a
    Gauss rule in cos(psi) with weight sqrt(1 - u^2), a Gauss-Legendre
    rule in cos(theta), and the periodic trapezoid rule in phi.  Low
    spherical harmonics are integrated to machine precision, so the odd
    moment sum(w_j y_j) vanishes exactly up to rounding.
    """
    if min(n_psi, n_theta, n_phi) < 2:
        raise ValueError("need at least 2 nodes per angle")
    u, wu = roots_chebyu(n_psi)        # cos(psi), weight sqrt(1-u^2)
    v, wv = roots_legendre(n_theta)    # cos(theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * np.pi / n_phi)

    su = np.sqrt(1.0 - u ** 2)
    sv = np.sqrt(1.0 - v ** 2)
    U, V, PH = np.meshgrid(u, v, phi, indexing="ij")
    SU, SV, _ = np.meshgrid(su, sv, phi, indexing="ij")
    nodes = np.stack(
        [SU * SV * np.cos(PH), SU * SV * np.sin(PH), SU * V, U], axis=-1
    ).reshape(-1, 4)
    weights = (wu[:, None, None] * wv[None, :, None] * wphi[None, None, :]).reshape(-1)
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    return S3Grid(nodes=nodes, weights=weights, scheme="product",
                  params=(int(n_psi), int(n_theta), int(n_phi)))


def mc_grid(n, seed):
    """Monte Carlo grid: uniform nodes (normalized Gaussians), weights 2 pi^2 / N."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, 4))
    nodes = g / np.linalg.norm(g, axis=1)[:, None]
    weights = np.full(n, VOL_S3 / n)
    return S3Grid(nodes=nodes, weights=weights, scheme="mc", params=(int(n), int(seed)))


@dataclass(frozen=True)
class BoundaryData:
    """Quaternion samples of L(y) on a grid, with an optional generator.

    ``real_flag`` is true exactly when every sample has zero imaginary
    part.  ``fn``, when present, maps a stack of unit quaternions (M, 4)
    to values ((M,) real or (M, 4) quaternion) and allows resampling at
    fresh points (Monte Carlo discretization); it is not serialized.
    """

    grid: S3Grid
    values: np.ndarray   # (N, 4)
    fn: object = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n, 4):
            raise ValueError("values must be (N, 4) matching the grid")
        object.__setattr__(self, "values", values)

    @property
    def real_flag(self):
        return bool(np.all(self.values[:, :3] == 0.0))

    @property
    def real_values(self):
        if not self.real_flag:
            raise ValueError("boundary data is not real-valued")
        return self.values[:, 3]

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn on the grid; fn maps (M, 4) nodes to (M,) or (M, 4)."""
        vals = np.asarray(fn(grid.nodes), dtype=float)
        if vals.ndim == 1:
            full = np.zeros((grid.n, 4))
            full[:, 3] = vals
            vals = full
        return cls(grid=grid, values=vals, fn=fn)

    def scaled(self, factor):
        """Data with L replaced by factor * L (keeps the generator)."""
        fn = self.fn
        scaled_fn = (lambda y, _f=fn, _c=factor: _c * np.asarray(_f(y))) if fn else None
        return BoundaryData(grid=self.grid, values=factor * self.values, fn=scaled_fn)


class KernelP:
    """Symmetric quaternion kernel P on node pairs of a grid.

    Either dense entries (N, N, 4) or a separable list of terms
    P_ij = sum_t f_t(y_i) g_t(y_j); the zero kernel is a separable kernel
    with no terms.  The full operator is M(z, y) = -y delta(z - y) +
    P(z, y); the delta part never appears here.
    """

    def __init__(self, grid, dense=None, terms=(), check=True):
        self.grid = grid
        self.dense = None if dense is None else np.asarray(dense, dtype=float)
        self.terms = tuple((np.asarray(f, dtype=float), np.asarray(g, dtype=float))
                           for f, g in terms)
        if self.dense is not None:
            if self.dense.shape != (grid.n, grid.n, 4):
                raise ValueError("dense kernel must be (N, N, 4)")
            if check and not np.allclose(self.dense, np.swapaxes(self.dense, 0, 1),
                                         atol=1e-12, rtol=0.0):
                raise ValueError("kernel must be symmetric: P_ij = P_ji")
        for f, g in self.terms:
            if f.shape != (grid.n, 4) or g.shape != (grid.n, 4):
                raise ValueError("separable factors must be (N, 4)")
        if check and self.dense is None and self.terms:
            self._spot_check_symmetry()

    def _spot_check_symmetry(self, m=32):
        rng = np.random.default_rng(0)
        i = rng.integers(0, self.grid.n, size=m)
        j = rng.integers(0, self.grid.n, size=m)
        pij = sum(qmul(f[i], g[j]) for f, g in self.terms)
        pji = sum(qmul(f[j], g[i]) for f, g in self.terms)
        if not np.allclose(pij, pji, atol=1e-10):
            raise ValueError("separable kernel is not symmetric")

    @classmethod
    def from_dense(cls, grid, entries, check=True):
        return cls(grid, dense=entries, check=check)

    @classmethod
    def separable(cls, grid, terms):
        return cls(grid, terms=terms)

    @classmethod
    def zero(cls, grid):
        return cls(grid, terms=())

    @property
    def is_zero(self):
        return self.dense is None and not self.terms

    @property
    def is_separable(self):
        return self.dense is None

    def to_dense(self):
        if self.dense is not None:
            return self.dense
        out = np.zeros((self.grid.n, self.grid.n, 4))
        for f, g in self.terms:
            out += qmul(f[:, None, :], g[None, :, :])
        return out


def _check_interior(grid, x, what="evaluation"):
    r = float(np.linalg.norm(x))
    if r >= 1.0:
        raise ValueError(f"{what} point must lie inside the unit ball, |x| = {r:.3f}")
    margin = MARGIN_FACTOR * grid.spacing_scale
    if r > 1.0 - margin:
        warnings.warn(
            f"{what} at |x| = {r:.4f} is within {margin:.4f} of S; "
            "quadrature accuracy degrades near the boundary",
            AccuracyWarning,
            stacklevel=3,
        )


class BoundaryHarmonic:
    """Interior harmonic function from real boundary data.

    phi(x) = 1 + sum_j w_j L_j^2 / |x - y_j|^2, the quadrature form of the
    layer potential, with analytic gradient.
    """

    def __init__(self, data):
        self.data = data
        self._lam2 = data.grid.weights * data.real_values ** 2
        self._nodes = data.grid.nodes

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        _check_interior(self.data.grid, x, "harmonic evaluation")
        d = x[None, :] - self._nodes
        r2 = np.einsum("ij,ij->i", d, d)
        value = 1.0 + float(np.sum(self._lam2 / r2))
        grad = -2.0 * np.einsum("i,ij->j", self._lam2 / r2 ** 2, d)
        return value, grad


def phi_boundary(data, x):
    """(phi, grad phi) at interior x from real boundary data."""
    return BoundaryHarmonic(data).value_and_grad(x)


def robin_data(provider, y):
    """Boundary combination (phi + d_n phi - 1) / (2 pi^2) at y on S.

    Equals L(y)^2 for fields produced by the layer potential.  The
    provider must be analytic at the boundary (interior-limit values);
    quadrature providers are singular on S and are rejected by their own
    pole checks.
    """
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(y) - 1.0) > 1e-8:
        raise ValueError("robin data is defined on the unit sphere")
    value, grad = provider.value_and_grad(y)
    return (value + float(y @ grad) - 1.0) / VOL_S3


def discretize_thooft(data, n, seed):
    """Monte Carlo reduction of real boundary data to rank-N data.

    Samples N uniform points on S and sets lam_i = pi sqrt(2/N) L(x_i),
    M = diag(-x_i).  Requires ``data.fn`` so L can be evaluated at the
    fresh sample points.
    """
    if not data.real_flag:
        raise ValueError("discretization requires real boundary data")
    if data.fn is None:
        raise ValueError("boundary data needs an attached sampling function")
    sample = mc_grid(n, seed)
    lvals = np.asarray(data.fn(sample.nodes), dtype=float)
    if lvals.ndim != 1:
        raise ValueError("sampling function must return real values")
    lam = np.pi * np.sqrt(2.0 / n) * lvals
    return thooft_data(sample.nodes, lam)


def mc_phi_errors(data, n_list, seed, points):
    """max_x |phi^(N) - phi| for each N, plus the fitted log-log slope.

    The reference phi comes from the data's own (product) grid; each
    phi^(N) is the pole sum of the rank-N Monte Carlo reduction.  Seeds
    are offset per N so samples are independent but reproducible.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ref = BoundaryHarmonic(data)
    ref_vals = np.array([ref.value_and_grad(x)[0] for x in points])
    errors = []
    for k, n in enumerate(n_list):
        reduced = discretize_thooft(data, n, seed + k)
        prov = PoleSumHarmonic(reduced.M[np.arange(n), np.arange(n)] * -1.0,
                               reduced.L[:, 3])
        vals = np.array([prov.value_and_grad(x)[0] for x in points])
        errors.append(float(np.max(np.abs(vals - ref_vals))))
    slope = float(np.polyfit(np.log(np.asarray(n_list, dtype=float)),
                             np.log(np.asarray(errors)), 1)[0])
    return errors, slope


def constraint_residual_inf(data, kernel, block=512):
    """max_ij |Im R_ij| for R = L*L - y*P - P*y + integral P*P.

    The delta parts of the full operator contribute only the real
    y*z delta term and are dropped; the remaining Nystrom residual
    vanishes (as the grid refines) iff (L, P) satisfies the constraint.
    Evaluated in row blocks; the quadratic term uses the kernel's
    separable structure when available, otherwise one dense quaternion
    matmul per block (keep dense kernels on verification-sized grids).
    """
    if kernel.grid is not data.grid and kernel.grid.n != data.grid.n:
        raise ValueError("kernel and data grids do not match")
    from adhm.quat import embed_matrix, unembed_matrix

    L, y, w = data.values, data.grid.nodes, data.grid.weights
    n = data.grid.n
    Lc = qconj(L)
    yc = qconj(y)

    if kernel.is_separable:
        terms = kernel.terms
        # sandwich operators Phi_st(q) = sum_k w_k g_s(y_k)* q f_t(y_k)
        ops = {}
        for s, (_, gs) in enumerate(terms):
            lm = np.swapaxes(qmul(qconj(gs)[:, None, :], BASIS[None, :, :]), 1, 2)
            for t, (ft, _) in enumerate(terms):
                rm = np.swapaxes(qmul(BASIS[None, :, :], ft[:, None, :]), 1, 2)
                ops[s, t] = np.einsum("k,kab,kbc->ac", w, lm, rm)
        Pc = wPc = None
    else:
        P = kernel.dense
        Pc = embed_matrix(P)
        wPc = np.repeat(w, 2)[:, None] * Pc

    worst = 0.0
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        rows = slice(lo, hi)
        if kernel.is_separable:
            Prow = np.zeros((hi - lo, n, 4))
            for f, g in kernel.terms:
                Prow += qmul(f[rows, None, :], g[None, :, :])
            Q = np.zeros((hi - lo, n, 4))
            for (s, t), op in ops.items():
                mid = qconj(kernel.terms[s][0][rows]) @ op.T   # Phi_st(f_s*)
                Q += qmul(mid[:, None, :], kernel.terms[t][1][None, :, :])
        else:
            Prow = kernel.dense[rows]
            blk = embed_matrix(qconj(Prow)) @ wPc
            Q = unembed_matrix(blk)
        R = qmul(Lc[rows, None, :], L[None, :, :])
        R -= qmul(yc[rows, None, :], Prow)
        R -= qmul(qconj(Prow), y[None, :, :])
        R += Q
        worst = max(worst, float(
            np.sqrt(np.einsum("ijc,ijc->ij", R[..., :3], R[..., :3])).max()
        ))
    return worst


def simple_example(lam, grid):
    """Closed-form non-real data: L(y) = kappa y, P(y, z) = lam (y + z).

    kappa is fixed by 2 pi^2 lam^2 - 2 lam + kappa^2 = 0, and the
    resulting field is the 1-instanton at the origin.  In this package's
    normalization (the pairing integrates over S with the standard
    measure, total volume 2 pi^2 - the same normalization that makes
    constant data L0 produce phi = 1 + 2 pi^2 L0^2) its size is

        rho = (1 - 2 pi^2 lam) / (2 pi sqrt(lam (1 - pi^2 lam))),

    verified against the rank-1 transform's action-density profile.
    rho -> 0 as lam -> 1/(2 pi^2) and rho -> infinity as lam -> 0.

    Returns (BoundaryData, KernelP, rho).  Requires 0 < 2 pi^2 lam < 1.
    """
    lam = float(lam)
    if not 0.0 < 2.0 * np.pi ** 2 * lam < 1.0:
        raise ValueError("parameter must satisfy 0 < 2 pi^2 lam < 1")
    kappa2 = 2.0 * lam - 2.0 * np.pi ** 2 * lam ** 2
    kappa = np.sqrt(kappa2)
    if not 0.0 < kappa * np.pi * np.sqrt(2.0) < 1.0:
        raise ValueError("derived kappa violates 0 < kappa pi sqrt(2) < 1")
    rho = (1.0 - 2.0 * np.pi ** 2 * lam) / (
        2.0 * np.pi * np.sqrt(lam * (1.0 - np.pi ** 2 * lam))
    )
    data = BoundaryData.from_function(grid, lambda y: kappa * np.asarray(y, dtype=float))
    ones = np.tile(ONE, (grid.n, 1))
    kernel = KernelP.separable(
        grid, [(lam * grid.nodes, ones), (lam * ones, grid.nodes.copy())]
    )
    return data, kernel, rho


class GeneralTransform:
    """Evaluator for the Nystrom-discretized transform of (L, P).

    Separable kernels (including P = 0) go through a closed-form
    reduction; dense kernels assemble the full quaternion system per
    point and reuse one LU factorization for v and its derivatives.
    """

    def __init__(self, data, kernel=None):
        self.data = data
        self.kernel = kernel if kernel is not None else KernelP.zero(data.grid)
        if self.kernel.grid.n != data.grid.n:
            raise ValueError("kernel and data grids do not match")
        if not self.kernel.is_separable:
            w = data.grid.weights
            self._wp = w[:, None, None] * self.kernel.dense
        else:
            self._wp = None

    def potential(self, x):
        """A_mu(x): (4, 4) array of imaginary quaternions."""
        x = np.asarray(x, dtype=float)
        _check_interior(self.data.grid, x, "transform evaluation")
        if self.kernel.is_separable:
            v, dv = self._solve_separable(x)
        else:
            v, dv = self._solve_dense(x)
        return assemble_potential(v, dv, weights=self.data.grid.weights)

    def evaluator(self):
        return self.potential

    # -- separable / zero-kernel path ------------------------------------

    def _solve_separable(self, x):
        grid, L = self.data.grid, self.data.values
        y, w = grid.nodes, grid.weights
        u = qinv(x[None, :] - y)                      # (N, 4)
        du = -qmul(qmul(u[None, :, :], BASIS[:, None, :]), u[None, :, :])  # (4, N, 4)
        terms = self.kernel.terms
        if not terms:
            v = -qmul(L, u)
            dv = -qmul(L[None, :, :], du)
            return v, dv

        t = len(terms)
        H = np.empty((t, t, 4))
        beta = np.empty((t, 4))
        gu = [qmul(g, u) for _, g in terms]
        lu_ = qmul(L, u)
        for s in range(t):
            for r in range(t):
                H[s, r] = np.einsum("j,jc->c", w, qmul(gu[s], terms[r][0]))
        for r in range(t):
            beta[r] = np.einsum("j,jc->c", w, qmul(lu_, terms[r][0]))

        K = np.zeros((4 * t, 4 * t))
        for r in range(t):
            for s in range(t):
                block = right_mul_matrix(H[s, r])
                if s == r:
                    block = block + np.eye(4)
                K[4 * r:4 * r + 4, 4 * s:4 * s + 4] = block
        cond = np.linalg.cond(K)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularSystemError("reduced kernel system is singular",
                                      where=tuple(x))
        c = np.linalg.solve(K, -beta.reshape(-1)).reshape(t, 4)

        cg = sum(qmul(c[s][None, :], terms[s][1]) for s in range(t))  # (N, 4)
        lcg = L + cg
        v = -qmul(lcg, u)

        dv = np.empty((4, grid.n, 4))
        for mu in range(4):
            dgu = [qmul(g, du[mu]) for _, g in terms]
            dlu = qmul(L, du[mu])
            rhs = np.empty((t, 4))
            for r in range(t):
                dbeta = np.einsum("j,jc->c", w, qmul(dlu, terms[r][0]))
                rhs[r] = -dbeta
                for s in range(t):
                    dH = np.einsum("j,jc->c", w, qmul(dgu[s], terms[r][0]))
                    rhs[r] -= qmul(c[s], dH)
            dc = np.linalg.solve(K, rhs.reshape(-1)).reshape(t, 4)
            dcg = sum(qmul(dc[s][None, :], terms[s][1]) for s in range(t))
            dv[mu] = -qmul(dcg, u) - qmul(lcg, du[mu])
        return v, dv

    # -- dense path -------------------------------------------------------

    def _solve_dense(self, x):
        grid, L = self.data.grid, self.data.values
        A = self._wp.copy()
        idx = np.arange(grid.n)
        A[idx, idx] += x[None, :] - grid.nodes
        solver = RightSolver(A, context=tuple(x))
        v = solver.solve(L)
        dv = solver.solve(qmul(v[None, :, :], BASIS[:, None, :]))
        return v, dv


def general_transform(data, kernel, x):
    """One-shot A_mu(x) for data (L, P); see GeneralTransform."""
    return GeneralTransform(data, kernel).potential(x)


def ansatz_transform(data, x):
    """Transform for real L with the pure delta kernel (P = 0).

    Shares the zero-kernel code path with general_transform, so the two
    agree bitwise when P = 0.
    """
    if not data.real_flag:
        raise ValueError("ansatz transform requires real boundary data")
    return GeneralTransform(data, None).potential(x)
