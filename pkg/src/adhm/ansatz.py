"""Harmonic-function ansatz for self-dual gauge potentials.

A harmonic function phi on a region of R^4 generates a self-dual SU(2)
potential through A_mu = (1/2) T_munu d_nu(log phi), where T is the
antisymmetric imaginary-quaternion tensor fixed by e_mu* e_nu =
delta_munu + T_munu.  Providers bundle phi with its analytic gradient;
finite differences are reserved for the verification layer in
adhm.fields.
"""

import numpy as np

from adhm.quat import BASIS, ONE, qmul, qconj


def t_tensor():
    """The (4, 4) antisymmetric tensor T_munu = e_mu* e_nu - delta_munu.

    Computed from the basis multiplication table rather than entered by
    hand, so it inherits the e1*e2 = -e3 convention.  Shape (4, 4, 4):
    T[mu, nu] is an imaginary quaternion.
    """
    T = qmul(qconj(BASIS)[:, None, :], BASIS[None, :, :])
    T -= np.eye(4)[:, :, None] * ONE
    return T


_T = t_tensor()


class ConstantHarmonic:
    """phi identically equal to a constant."""

    def __init__(self, value=1.0):
        self.value = float(value)

    def value_and_grad(self, x):
        return self.value, np.zeros(4)


class PoleSumHarmonic:
    """Sum of fundamental solutions: phi(x) = base + sum_a lam_a^2 / |x - p_a|^2.

    ``points`` is (N, 4), ``lam`` the positive pole strengths.  The
    gradient is analytic.  Evaluation at a pole raises ValueError.
    """

    def __init__(self, points, lam, base=1.0):
        self.points = np.asarray(points, dtype=float).reshape(-1, 4)
        self.lam = np.asarray(lam, dtype=float).reshape(-1)
        if self.points.shape[0] != self.lam.shape[0]:
            raise ValueError("one strength per pole required")
        self.base = float(base)

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.points.shape[0] == 0:
            return self.base, np.zeros(4)
        d = x[None, :] - self.points          # (N, 4)
        r2 = np.einsum("ij,ij->i", d, d)
        if np.any(r2 < 1e-28):
            raise ValueError("harmonic sum evaluated at a pole")
        lam2 = self.lam ** 2
        value = self.base + np.sum(lam2 / r2)
        grad = -2.0 * np.einsum("i,ij->j", lam2 / r2 ** 2, d)
        return value, grad


class SumHarmonic:
    """Pointwise sum of harmonic providers (mixed boundary + interior poles)."""

    def __init__(self, *providers):
        self.providers = providers

    def value_and_grad(self, x):
        value, grad = 0.0, np.zeros(4)
        for p in self.providers:
            v, g = p.value_and_grad(x)
            value += v
            grad = grad + g
        return value, grad


def pole_sum_phi(points, weights):
    """Provider for phi = 1 + sum_a weights_a^2 / |x - points_a|^2."""
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.any(weights <= 0):
        raise ValueError("pole strengths must be positive")
    return PoleSumHarmonic(points, weights, base=1.0)


def ansatz_potential(provider, x):
    """Gauge potential A_mu = (1/2) T_munu d_nu(phi) / phi at x.

    Returns a (4, 4) array: row mu is the imaginary-quaternion value of
    A_mu.  Requires phi(x) > 0.
    """
    value, grad = provider.value_and_grad(np.asarray(x, dtype=float))
    if value <= 0.0:
        raise ValueError(f"ansatz requires phi > 0, got {value}")
    return 0.5 / value * np.einsum("mnc,n->mc", _T, grad)
