"""Leading-order theory for weak boundary data.

For |L| = O(eps) the kernel correction P is O(eps^2) and the gauge
potential is O(eps^2), built entirely from harmonic moments of the data:
with Psi_ab(x) = integral of L_a(y) L_b(y) / |x - y|^2 over S (a, b
running over the four quaternion components), the leading potential is

    A_mu = (1/2) sum_ab d_nu Psi_ab  e_a T_munu e_b* ,

whose three su(2) components are each self-dual abelian fields.  The
quaternion-square moment Phi = 1 + integral L^2 / |x - y|^2 carries the
trace and mixed parts of Psi; for real L everything collapses to the
single function Phi_4 and the expression is the linearization of the
harmonic-function ansatz.

The first-order kernel solving the linearized constraint is

    P_ij = (1/2) (y_i* - y_j*)^{-1} (L_i* L_j - L_j* L_i),

symmetric, zero for real L, and O(eps^2); plugged into the full
constraint residual it leaves a pure O(eps^4) remainder.
"""

import numpy as np

from adhm.quat import BASIS, qconj, qinv, qmul
from adhm.ansatz import t_tensor
from adhm.boundary import KernelP, _check_interior

_T = t_tensor()

# Sandwich coefficients S[mu, nu, a, b] = e_a T_munu e_b*, from the basis.
_SANDWICH = qmul(
    qmul(BASIS[None, None, :, None, :], _T[:, :, None, None, :]),
    qconj(BASIS)[None, None, None, :, :],
)


def c_operator(provider, a, x):
    """e_a-component of (1/2) T_munu d_nu(phi): a real 4-vector over mu.

    The linear map taking a harmonic function to a self-dual abelian
    potential; ``a`` is 1, 2 or 3.
    """
    if a not in (1, 2, 3):
        raise ValueError("component index must be 1, 2 or 3")
    _, grad = provider.value_and_grad(np.asarray(x, dtype=float))
    return 0.5 * np.einsum("mnc,n->mc", _T, grad)[:, a - 1]


class CapitalPhi:
    """Quaternion-valued harmonic moment 1 + integral L^2 / |x - y|^2.

    ``value_and_grad(x)`` returns (Phi (4,), dPhi (4, 4)) with dPhi[mu]
    the mu-derivative as a quaternion.  Each component is harmonic;
    ``component(mu)`` adapts one component to the scalar-provider
    interface used by c_operator.
    """

    def __init__(self, data):
        self.data = data
        self._l2 = qmul(data.values, data.values)   # (N, 4)
        self._wl2 = data.grid.weights[:, None] * self._l2

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        _check_interior(self.data.grid, x, "harmonic evaluation")
        d = x[None, :] - self.data.grid.nodes
        r2 = np.einsum("ij,ij->i", d, d)
        value = np.array([0.0, 0.0, 0.0, 1.0]) + np.einsum(
            "jc,j->c", self._wl2, 1.0 / r2
        )
        grad = -2.0 * np.einsum("jc,jm->mc", self._wl2 / r2[:, None] ** 2, d)
        return value, grad

    def component(self, mu):
        if mu not in (1, 2, 3, 4):
            raise ValueError("component index must be 1..4")
        return _PhiComponent(self, mu - 1)


class _PhiComponent:
    def __init__(self, parent, idx):
        self.parent = parent
        self.idx = idx

    def value_and_grad(self, x):
        value, grad = self.parent.value_and_grad(x)
        return float(value[self.idx]), grad[:, self.idx]


def capital_phi(data, x):
    """(Phi, grad Phi) at x; Phi a quaternion, grad a (4, 4) array."""
    return CapitalPhi(data).value_and_grad(x)


def p_first_order(data, min_separation=1e-6):
    """First-order kernel P_ij = (1/2)(y_i* - y_j*)^{-1} (L_i* L_j - L_j* L_i).

    Diagonal entries are zero (the numerator vanishes at coincidence and
    its directional limit is not prescribed); grids with nearly
    coincident nodes are rejected rather than regularized.
    """
    y, L = data.grid.nodes, data.values
    n = data.grid.n
    diff = qconj(y)[:, None, :] - qconj(y)[None, :, :]
    sep2 = np.einsum("ijc,ijc->ij", diff, diff)
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.min(sep2[off]) < min_separation ** 2:
        raise ValueError("grid has (nearly) coincident nodes")
    diff[np.arange(n), np.arange(n)] = np.array([0.0, 0.0, 0.0, 1.0])
    G = qmul(qconj(L)[:, None, :], L[None, :, :])
    comm = G - np.swapaxes(G, 0, 1)
    P = 0.5 * qmul(qinv(diff), comm)
    P[np.arange(n), np.arange(n)] = 0.0
    iu = np.triu_indices(n, 1)
    P[iu[1], iu[0]] = P[iu]   # exact symmetry
    return KernelP.from_dense(data.grid, P, check=False)


def _psi_gradient(data, x):
    """d_nu Psi_ab as a (4, 4, 4) array [nu, a, b]."""
    y, w, L = data.grid.nodes, data.grid.weights, data.values
    d = np.asarray(x, dtype=float)[None, :] - y
    r2 = np.einsum("ij,ij->i", d, d)
    ll = L[:, :, None] * L[:, None, :]          # (N, 4, 4) = L_a L_b per node
    coef = -2.0 * w / r2 ** 2
    return np.einsum("j,jn,jab->nab", coef, d, ll)


def linearized_potential_quat(data, x):
    """Leading-order potential as a (4, 4) quaternion array A_mu."""
    x = np.asarray(x, dtype=float)
    _check_interior(data.grid, x, "linearized evaluation")
    dpsi = _psi_gradient(data, x)
    return 0.5 * np.einsum("nab,mnabc->mc", dpsi, _SANDWICH)


def linearized_potential(data, x):
    """The three abelian fields: (3, 4) array, entry [a-1, mu]."""
    return linearized_potential_quat(data, x)[:, :3].T
