"""The finite-rank ADHM transform for SU(2).

Data is a pair (L, M): a length-N quaternion row vector and a symmetric
NxN quaternion matrix, subject to the reality constraint that
L* L + M* M has no imaginary part.  For each spacetime point x the row
vector v solves L + v (M + x) = 0, with x acting diagonally by right
multiplication, and the gauge potential is

    A_mu = [ v (d_mu v)* - (d_mu v) v* ] / (2 phi),    phi = 1 + v v*.

Derivatives of v are exact: differentiating the linear system gives
(d_mu v)(M + x) = -(v e_mu), solved with the same LU factorization, so
the only finite differencing anywhere lives in adhm.fields.
"""

import json
from dataclasses import dataclass

import numpy as np

from adhm.quat import (
    BASIS, ONE, qconj, qdagger, qmul, qmatmul, qnorm2, RightSolver,
)


@dataclass(frozen=True)
class ADHMData:
    """Quaternion pair (L, M); L is (N, 4), M is (N, N, 4) symmetric."""

    L: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        M = np.asarray(self.M, dtype=float)
        if L.ndim != 2 or L.shape[1] != 4:
            raise ValueError("L must be an (N, 4) quaternion row vector")
        n = L.shape[0]
        if M.shape != (n, n, 4):
            raise ValueError("M must be an (N, N, 4) quaternion matrix")
        if not np.array_equal(M, np.swapaxes(M, 0, 1)):
            raise ValueError("M must be symmetric entrywise")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "M", M)

    @property
    def rank(self):
        return self.L.shape[0]

    def to_dict(self):
        """JSON-ready dict; quaternion components ordered (e1, e2, e3, 1)."""
        return {"L": self.L.tolist(), "M": self.M.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(L=np.asarray(obj["L"], dtype=float),
                   M=np.asarray(obj["M"], dtype=float))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def thooft_data(points, weights):
    """Data with real L and diagonal M: L_a = lam_a, M = diag(-x_a).

    ``points`` are the N pole positions (quaternions), ``weights`` the
    positive sizes.  The constraint residual of the result is exactly 0.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    n = points.shape[0]
    if weights.shape != (n,):
        raise ValueError("one weight per point required")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    if n > 1:
        from scipy.spatial import cKDTree

        nearest = cKDTree(points).query(points, k=2)[0][:, 1]
        if np.min(nearest) < 1e-12:
            raise ValueError("pole points must be distinct")
    L = np.zeros((n, 4))
    L[:, 3] = weights
    M = np.zeros((n, n, 4))
    M[np.arange(n), np.arange(n)] = -points
    return ADHMData(L=L, M=M)


def constraint_residual(data):
    """max_ab | Im( (L* L + M* M)_ab ) |; zero iff the data is admissible."""
    L2d = data.L[None, :, :]
    G = qmatmul(qdagger(L2d), L2d) + qmatmul(qdagger(data.M), data.M)
    return float(np.sqrt(np.einsum("abc,abc->ab", G[..., :3], G[..., :3])).max())


def _system(data, x):
    A = data.M.copy()
    idx = np.arange(data.rank)
    A[idx, idx] += np.asarray(x, dtype=float)
    return A


def solve_v(data, x):
    """Row vector v with L + v (M + x) = 0.

    Raises SingularSystemError when the invertibility condition fails at
    x (the gauge field is singular there).
    """
    solver = RightSolver(_system(data, x), context=tuple(np.asarray(x, dtype=float)))
    return solver.solve(data.L)


def gauge_potential(data, x):
    """Gauge potential A_mu(x), a (4, 4) array of imaginary quaternions."""
    solver = RightSolver(_system(data, x), context=tuple(np.asarray(x, dtype=float)))
    v = solver.solve(data.L)
    rhs = qmul(v[None, :, :], BASIS[:, None, :])  # rows (v_j e_mu)_j
    dv = solver.solve(rhs)                        # (4, N, 4)
    return assemble_potential(v, dv)


def assemble_potential(v, dv, weights=None):
    """A_mu from v and its derivatives: [<v, dv> - <dv, v>] / (2 phi).

    The pairing is sum_j w_j v_j w_j* with unit weights by default (the
    finite transform) or quadrature weights (the boundary transform).
    """
    if weights is None:
        weights = np.ones(v.shape[0])
    phi = 1.0 + float(np.sum(weights * qnorm2(v)))
    t1 = qmul(v[None, :, :], qconj(dv))   # (4, N, 4): v_j (d_mu v_j)*
    t2 = qmul(dv, qconj(v)[None, :, :])
    return np.einsum("j,mjc->mc", weights, t1 - t2) / (2.0 * phi)


def gauge_evaluator(data):
    """Point evaluator x -> A(x) for the finite-difference oracle."""
    return lambda x: gauge_potential(data, x)
