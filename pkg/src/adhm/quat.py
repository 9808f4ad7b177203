"""Quaternion algebra in the e1*e2 = -e3 sign convention.

Quaternions are plain float64 arrays whose last axis has length 4,
holding components (q1, q2, q3, q4) of q = q1*e1 + q2*e2 + q3*e3 + q4.
The REAL part is the last component; this matches the on-disk component
order used by every serializer in the package.

The basis satisfies

    ea * eb = -delta_ab - eps_abc * ec        (so e1*e2 = -e3),

which is the mirror of the usual Hamilton convention ij = k.  All
downstream sign choices (the antisymmetric tensor built from e_mu* e_nu,
the duality orientation in adhm.fields) are pinned to this table; do not
change it without re-running the convention tests.

Dense quaternion linear algebra goes through the 2x2-complex embedding

    rho(q) = q4*I + qa*(i*sigma_a) = [[q4 + i q3, q2 + i q1],
                                      [-q2 + i q1, q4 - i q3]],

which is multiplicative and maps quaternion conjugation to the conjugate
transpose, so an NxN quaternion system becomes a 2Nx2N complex system
solved with ordinary LAPACK routines.
"""

import numpy as np
import scipy.linalg
from scipy.linalg import lapack


class SingularSystemError(ArithmeticError):
    """A quaternion linear system is singular or too ill-conditioned.

    Raised when the complex embedding cannot be factored or its estimated
    condition number exceeds the rejection threshold.  ``where`` carries
    the spacetime point or grid node the caller was evaluating, if any.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


# Rejection threshold for the embedded system's condition number.
COND_LIMIT = 1e12

ONE = np.array([0.0, 0.0, 0.0, 1.0])
E1 = np.array([1.0, 0.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0, 0.0])
# Basis e_mu = (e1, e2, e3, 1), indexed mu = 0..3 with mu = 3 the unit.
BASIS = np.stack([E1, E2, E3, ONE])


def quat(q1=0.0, q2=0.0, q3=0.0, q4=0.0):
    """Build a single quaternion from its components."""
    return np.array([q1, q2, q3, q4], dtype=float)


def from_real(r):
    """Real scalar(s) -> quaternion array r * 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape + (4,))
    out[..., 3] = r
    return out


def qmul(p, q):
    """Quaternion product with e1*e2 = -e3 (broadcasting over leading axes)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p1, p2, p3, p4 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    q1, q2, q3, q4 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    # vector part: p4*q_vec + q4*p_vec - p_vec x q_vec
    return np.stack(
        [
            p4 * q1 + q4 * p1 - (p2 * q3 - p3 * q2),
            p4 * q2 + q4 * p2 - (p3 * q1 - p1 * q3),
            p4 * q3 + q4 * p3 - (p1 * q2 - p2 * q1),
            p4 * q4 - (p1 * q1 + p2 * q2 + p3 * q3),
        ],
        axis=-1,
    )


def qconj(q):
    """Quaternion conjugate q* (negates the e1, e2, e3 components)."""
    q = np.asarray(q, dtype=float)
    return np.concatenate([-q[..., :3], q[..., 3:]], axis=-1)


def qnorm2(q):
    """Squared norm |q|^2 = q q*."""
    q = np.asarray(q, dtype=float)
    return np.einsum("...i,...i->...", q, q)


def qabs(q):
    """Norm |q|."""
    return np.sqrt(qnorm2(q))


def qre(q):
    """Real part (component of the unit element)."""
    return np.asarray(q)[..., 3]


def qim(q):
    """Imaginary components (q1, q2, q3)."""
    return np.asarray(q)[..., :3]


def qinv(q):
    """Quaternion inverse q* / |q|^2.

    Raises ValueError on (numerically) zero input.
    """
    q = np.asarray(q, dtype=float)
    n2 = qnorm2(q)
    if np.any(n2 == 0.0):
        raise ValueError("quaternion inverse of zero")
    return qconj(q) / n2[..., None]


def right_mul_matrix(q):
    """4x4 real matrix R with (c q)_components = R @ c_components.

    Right multiplication by a fixed quaternion is R-linear in c; this is
    the block used to reduce small quaternion-linear systems to real ones.
    """
    return qmul(BASIS, np.asarray(q)[None, :]).T


def embed(q):
    """Complex 2x2 embedding of a single quaternion."""
    q = np.asarray(q, dtype=float)
    a = q[..., 3] + 1j * q[..., 2]
    b = q[..., 1] + 1j * q[..., 0]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = -np.conj(b)
    out[..., 1, 1] = np.conj(a)
    return out


def embed_matrix(Q):
    """(N, M, 4) quaternion matrix -> (2N, 2M) complex matrix."""
    Q = np.asarray(Q, dtype=float)
    n, m = Q.shape[0], Q.shape[1]
    blocks = embed(Q)  # (N, M, 2, 2)
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * m)


def unembed_matrix(C):
    """Inverse of embed_matrix (reads each 2x2 block directly)."""
    C = np.asarray(C)
    n, m = C.shape[0] // 2, C.shape[1] // 2
    blocks = C.reshape(n, 2, m, 2).transpose(0, 2, 1, 3)
    a = blocks[..., 0, 0]
    b = blocks[..., 0, 1]
    return np.stack([b.imag, b.real, a.imag, a.real], axis=-1)


def qdagger(Q):
    """Conjugate transpose of a quaternion matrix."""
    return qconj(np.swapaxes(np.asarray(Q, dtype=float), 0, 1))


def qmatmul(P, Q):
    """Quaternion matrix product via the complex embedding."""
    C = embed_matrix(P) @ embed_matrix(Q)
    return unembed_matrix(C)


def _as_rows(B):
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        return B[None, :, :], True
    return B, False


class RightSolver:
    """LU-backed solver for row systems  v @ A = -B  over the quaternions.

    ``A`` is an (N, N, 4) quaternion matrix acting on quaternion row
    vectors by v -> sum_i v_i A_ij (entries multiply from the right of
    each component).  The factorization is done once on the 2Nx2N complex
    embedding and reused across right-hand sides, which is how the
    gauge-potential evaluators obtain v and its four derivatives from a
    single LU.
    """

    def __init__(self, A, cond_limit=COND_LIMIT, context=None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 3 or A.shape[0] != A.shape[1] or A.shape[2] != 4:
            raise ValueError("expected an (N, N, 4) quaternion matrix")
        self.n = A.shape[0]
        self.context = context
        Ac = embed_matrix(A).T  # transpose: rows systems become column systems
        anorm = np.linalg.norm(Ac, 1)
        try:
            import warnings

            with warnings.catch_warnings():
                # exact singularity is reported through the rcond check below
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                self._lu, self._piv = scipy.linalg.lu_factor(Ac)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise SingularSystemError(str(exc), where=context) from exc
        rcond = lapack.zgecon(self._lu, anorm)[0] if anorm > 0 else 0.0
        if not np.isfinite(rcond) or rcond == 0 or 1.0 / rcond > cond_limit:
            raise SingularSystemError(
                f"system condition number exceeds {cond_limit:.1e}"
                + (f" at {context}" if context is not None else ""),
                where=context,
            )

    def solve(self, B):
        """Return v with v @ A = -B; B is one row (N,4) or a stack (k,N,4)."""
        rows, single = _as_rows(B)
        if rows.shape[1] != self.n:
            raise ValueError("right-hand side length does not match system")
        # rho(v) rho(A) = rho(-B)  =>  rho(A)^T rho(v)^T = -rho(B)^T,
        # with plain (unconjugated) complex transposes.
        Bc = embed_matrix(rows)  # (2k, 2N)
        X = scipy.linalg.lu_solve((self._lu, self._piv), -Bc.T)
        v = unembed_matrix(np.ascontiguousarray(X.T))
        return v[0] if single else v


def solve_right(A, B, cond_limit=COND_LIMIT, context=None):
    """Solve v @ A = -B for quaternion row vector(s) v.

    Raises SingularSystemError when the embedded system's condition
    number exceeds ``cond_limit``.
    """
    return RightSolver(A, cond_limit=cond_limit, context=context).solve(B)
