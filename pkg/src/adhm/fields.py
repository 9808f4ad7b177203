"""Finite-difference curvature and gauge-invariant verification scalars.

This module is the oracle the transforms are checked against: curvature
is assembled from central differences of any point-evaluator for A plus
the exact commutator, and the self-duality residual / action density are
computed from it.  Nothing here knows how A was produced.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from adhm.quat import qmul, qnorm2, SingularSystemError

# Default finite-difference step.  Evaluation points should stay at
# distance >= 10*h from singularities and from the domain boundary.
DEFAULT_STEP = 1e-3

# Orientation of R^4 used by the duality operator: eps[1,2,3,4] = +1 in
# 1-based labels.  With the e1*e2 = -e3 multiplication table this is the
# orientation in which the harmonic-ansatz fields (and hence every
# transform output in this package) are SELF-dual.  The tensor T built
# from e_mu* e_nu is anti-self-dual in this orientation: the duality of
# the generating tensor and of the curvature it produces are opposite.
_EPS_SIGN = 1.0


def _levi_civita4():
    eps = np.zeros((4, 4, 4, 4))
    for perm, sign in _permutations_with_sign((0, 1, 2, 3)):
        eps[perm] = sign
    return _EPS_SIGN * eps


def _permutations_with_sign(items):
    from itertools import permutations

    base = list(items)
    for perm in permutations(base):
        inversions = sum(
            1
            for i in range(len(perm))
            for j in range(i + 1, len(perm))
            if perm[i] > perm[j]
        )
        yield perm, (-1.0) ** inversions


_EPS4 = _levi_civita4()


def curvature(evaluator, x, h=DEFAULT_STEP):
    """Curvature F_munu at x from an A-evaluator, by central differences.

    ``evaluator(x)`` must return the (4, 4) quaternion array of A_mu
    values.  Derivative terms are O(h^2) accurate; the commutator uses
    the exact A at x.  Returns the (4, 4, 4) antisymmetric array F.
    """
    x = np.asarray(x, dtype=float)
    if h <= 0:
        raise ValueError("step must be positive")
    A0 = np.asarray(evaluator(x))
    dA = np.empty((4, 4, 4))
    for mu in range(4):
        step = np.zeros(4)
        step[mu] = h
        Ap = np.asarray(evaluator(x + step))
        Am = np.asarray(evaluator(x - step))
        dA[mu] = (Ap - Am) / (2.0 * h)
    F = dA - np.swapaxes(dA, 0, 1)
    comm = qmul(A0[:, None, :], A0[None, :, :])
    F += comm - np.swapaxes(comm, 0, 1)
    return F


def hodge_dual(F):
    """Dual (1/2) eps_munualbe F_albe in the package orientation."""
    return 0.5 * np.einsum("mnab,abc->mnc", _EPS4, np.asarray(F))


def fnorm(F):
    """Frobenius norm over all entries and quaternion components."""
    F = np.asarray(F)
    return float(np.sqrt(np.sum(F * F)))


def sd_residual(F, floor=1e-12):
    """Relative self-duality defect  |dual(F) - F| / max(|F|, floor).

    Zero for a self-dual field, 2 for an anti-self-dual one; the floor
    keeps the zero field at residual 0.
    """
    F = np.asarray(F)
    defect = fnorm(hodge_dual(F) - F)
    return defect / max(fnorm(F), floor)


def action_density(F):
    """Gauge-invariant density sum_{mu<nu} |F_munu|^2."""
    F = np.asarray(F)
    total = 0.0
    for mu in range(4):
        for nu in range(mu + 1, 4):
            total += float(qnorm2(F[mu, nu]))
    return total


# Clearance kept between lattice points and declared gauge singularities.
# Central differences at the default step lose the self-duality targets
# well before the solver becomes ill-conditioned, so this is much larger
# than the boundary clearance of 10*h.
SINGULAR_MARGIN = 0.35


def ball_lattice(n_per_axis, extent, avoid=(), margin=None, h=DEFAULT_STEP,
                 avoid_margin=None):
    """Cubic lattice in [-extent, extent]^4, filtered to the open unit ball.

    Points closer than ``margin`` (default 10*h) to the unit sphere, or
    closer than ``avoid_margin`` (default SINGULAR_MARGIN) to any point
    in ``avoid``, are dropped, so finite-difference stencils never
    straddle a singularity.
    """
    if margin is None:
        margin = 10.0 * h
    if avoid_margin is None:
        avoid_margin = SINGULAR_MARGIN
    axis = np.linspace(-extent, extent, n_per_axis)
    pts = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1)
    pts = pts.reshape(-1, 4)
    keep = np.linalg.norm(pts, axis=1) < 1.0 - margin
    for p in avoid:
        keep &= np.linalg.norm(pts - np.asarray(p, dtype=float), axis=1) > avoid_margin
    return pts[keep]


@dataclass
class FieldSample:
    """Per-point field diagnostics on a lattice of interior points."""

    points: np.ndarray               # (n, 4)
    sd_residuals: np.ndarray         # (n,)
    action_densities: np.ndarray     # (n,)
    potentials: np.ndarray | None = None   # (n, 4, 4) quaternion A_mu
    skipped: list = field(default_factory=list)  # points where the solve failed

    @property
    def max_sd_residual(self):
        return float(np.max(self.sd_residuals)) if len(self.sd_residuals) else 0.0

    def to_csv(self, include_potential=False):
        """Deterministic CSV rendering (17 significant digits)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["x1", "x2", "x3", "x4", "sd_residual", "action_density"]
        if include_potential and self.potentials is not None:
            header += [f"A{mu}_{c}" for mu in range(1, 5) for c in range(1, 5)]
        writer.writerow(header)
        for i, p in enumerate(self.points):
            row = [f"{v:.17g}" for v in p]
            row += [f"{self.sd_residuals[i]:.17g}", f"{self.action_densities[i]:.17g}"]
            if include_potential and self.potentials is not None:
                row += [f"{v:.17g}" for v in self.potentials[i].reshape(-1)]
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self):
        obj = {
            "points": self.points.tolist(),
            "sd_residual": self.sd_residuals.tolist(),
            "action_density": self.action_densities.tolist(),
            "skipped": [list(map(float, p)) for p in self.skipped],
        }
        if self.potentials is not None:
            obj["A"] = self.potentials.tolist()
        return json.dumps(obj, sort_keys=True, indent=1)


def sample_field(evaluator, points, h=DEFAULT_STEP, keep_potential=False):
    """Evaluate curvature diagnostics at each lattice point.

    Points where the evaluator raises SingularSystemError are recorded in
    ``skipped`` and omitted from the arrays; other exceptions propagate.
    """
    pts, res, act, pots, skipped = [], [], [], [], []
    for x in np.asarray(points, dtype=float):
        try:
            F = curvature(evaluator, x, h=h)
            if keep_potential:
                pots.append(np.asarray(evaluator(x)))
        except SingularSystemError:
            skipped.append(x)
            continue
        pts.append(x)
        res.append(sd_residual(F))
        act.append(action_density(F))
    return FieldSample(
        points=np.array(pts).reshape(-1, 4),
        sd_residuals=np.array(res),
        action_densities=np.array(act),
        potentials=np.array(pots).reshape(-1, 4, 4) if keep_potential else None,
        skipped=skipped,
    )
