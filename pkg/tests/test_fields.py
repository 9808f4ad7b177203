import json

import numpy as np
import pytest

from adhm.quat import E1, qconj, qmul
from adhm.ansatz import t_tensor
from adhm.finite import gauge_potential, thooft_data
from adhm.fields import (
    action_density, ball_lattice, curvature, fnorm, hodge_dual,
    sample_field, sd_residual,
)


def unit_field(center):
    """A(x) = Lam* dLam for Lam = (x - c)/|x - c|: pure gauge, F = 0."""
    c = np.asarray(center, dtype=float)

    def lam(x):
        q = x - c
        return q / np.linalg.norm(q)

    def evaluator(x):
        q = x - c
        n = np.linalg.norm(q)
        A = np.empty((4, 4))
        for mu in range(4):
            e = np.zeros(4)
            e[mu] = 1.0
            dlam = e / n - q * (q[mu] / n ** 3)
            A[mu] = qmul(qconj(lam(x)), dlam)
        return A

    return evaluator


def test_curvature_zero_field():
    F = curvature(lambda x: np.zeros((4, 4)), np.zeros(4))
    assert np.array_equal(F, np.zeros((4, 4, 4)))


def test_curvature_constant_commuting_field():
    A = np.tile(0.3 * E1, (4, 1))
    F = curvature(lambda x: A.copy(), np.array([0.1, 0, 0, 0.2]))
    assert fnorm(F) < 1e-12


def test_curvature_rejects_bad_step():
    with pytest.raises(ValueError):
        curvature(lambda x: np.zeros((4, 4)), np.zeros(4), h=0.0)


def test_pure_gauge_has_no_curvature():
    ev = unit_field([0.0, 0.0, 0.0, 2.0])
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(size=4) * 0.3
        assert fnorm(curvature(ev, x, h=1e-3)) < 1e-5


def test_dual_is_involution():
    rng = np.random.default_rng(1)
    G = rng.normal(size=(4, 4, 4))
    G -= np.swapaxes(G, 0, 1)
    assert np.allclose(hodge_dual(hodge_dual(G)), G)


def test_sd_residual_projected_fields():
    rng = np.random.default_rng(2)
    G = rng.normal(size=(4, 4, 4))
    G -= np.swapaxes(G, 0, 1)
    sd = 0.5 * (G + hodge_dual(G))
    asd = 0.5 * (G - hodge_dual(G))
    assert sd_residual(sd) < 1e-13
    assert sd_residual(asd) == pytest.approx(2.0, abs=1e-12)
    assert sd_residual(np.zeros((4, 4, 4))) == 0.0


def test_t_tensor_is_antiself_dual():
    # in the package orientation the generating tensor is anti-self-dual
    # while the curvature of the fields it generates is self-dual
    T = t_tensor()
    assert fnorm(hodge_dual(T) + T) == 0.0
    assert sd_residual(T) == pytest.approx(2.0)


def test_action_density_zero_field():
    assert action_density(np.zeros((4, 4, 4))) == 0.0


def test_action_density_profile_law():
    # rank 1, size 1 at origin: s ~ (1 + r^2)^{-4}; the r -> 0 limit of
    # s(0)/s(1/2) is (1 + 1/4)^4 = 2.44140625
    data = thooft_data(np.zeros((1, 4)), [1.0])
    ev = lambda x: gauge_potential(data, x)

    def s(r):
        return action_density(curvature(ev, np.array([r, 0.0, 0.0, 0.0]), h=1e-4))

    radii = [0.35, 0.5, 0.65, 0.8]
    values = [s(r) for r in radii]
    assert all(a > b for a, b in zip(values, values[1:]))   # decreasing
    for r1, s1 in zip(radii, values):
        for r2, s2 in zip(radii, values):
            predicted = ((1 + r2 ** 2) / (1 + r1 ** 2)) ** 4
            assert s1 / s2 == pytest.approx(predicted, rel=2e-3)
    # the r -> 0 reference value of the law itself
    assert (1 + 0.25) ** 4 == pytest.approx(2.44140625)


def test_action_density_gauge_invariant():
    data = thooft_data(np.array([[0.1, 0.0, 0.0, 0.0]]), [0.9])
    base = lambda x: gauge_potential(data, x)
    gauge = unit_field([0.0, 0.0, 0.0, 2.0])

    def transformed(x):
        A = base(x)
        q = x - np.array([0.0, 0.0, 0.0, 2.0])
        lam = q / np.linalg.norm(q)
        out = np.empty((4, 4))
        for mu in range(4):
            out[mu] = qmul(qmul(qconj(lam), A[mu]), lam) + gauge(x)[mu]
        return out

    rng = np.random.default_rng(3)
    for _ in range(4):
        d = rng.normal(size=4)
        x = d * (0.55 / np.linalg.norm(d))
        s1 = action_density(curvature(base, x, h=1e-3))
        s2 = action_density(curvature(transformed, x, h=1e-3))
        assert abs(s1 - s2) / s1 < 1e-5


def test_richardson_consistency():
    data = thooft_data(np.zeros((1, 4)), [1.0])
    ev = lambda x: gauge_potential(data, x)
    x = np.array([0.31, -0.4, 0.22, 0.35])
    r_2h = sd_residual(curvature(ev, x, h=2e-3))
    r_h = sd_residual(curvature(ev, x, h=1e-3))
    assert 3.0 < r_2h / r_h < 5.0


def test_ball_lattice_filters():
    pts = ball_lattice(7, 0.8, avoid=[np.zeros(4)], avoid_margin=0.3, h=1e-3)
    assert len(pts) > 0
    assert np.all(np.linalg.norm(pts, axis=1) < 1.0 - 10 * 1e-3)
    assert np.all(np.linalg.norm(pts, axis=1) > 0.3)
    full = ball_lattice(5, 0.2)
    assert len(full) == 5 ** 4   # nothing filtered at small extent


def test_sample_field_skips_singular_points():
    data = thooft_data(np.zeros((1, 4)), [1.0])
    pts = np.array([[0.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0]])
    fs = sample_field(lambda x: gauge_potential(data, x), pts, h=1e-3)
    assert len(fs.skipped) == 1
    assert len(fs.points) == 1
    assert fs.max_sd_residual < 1e-4


def test_field_sample_export():
    data = thooft_data(np.zeros((1, 4)), [1.0])
    pts = ball_lattice(3, 0.6, avoid=[np.zeros(4)], avoid_margin=0.4)
    fs = sample_field(lambda x: gauge_potential(data, x), pts, h=1e-3,
                      keep_potential=True)
    text = fs.to_csv(include_potential=True)
    header = text.splitlines()[0].split(",")
    assert header[:6] == ["x1", "x2", "x3", "x4", "sd_residual", "action_density"]
    assert len(header) == 6 + 16
    assert len(text.splitlines()) == len(fs.points) + 1
    obj = json.loads(fs.to_json())
    assert len(obj["points"]) == len(fs.points)
    # deterministic rendering
    assert text == fs.to_csv(include_potential=True)
