import warnings

import numpy as np
import pytest

from adhm.quat import ONE, qconj, qmul, qnorm2
from adhm.ansatz import ConstantHarmonic, PoleSumHarmonic, SumHarmonic, ansatz_potential
from adhm.boundary import (
    VOL_S3, AccuracyWarning, BoundaryData, BoundaryHarmonic, GeneralTransform,
    KernelP, S3Grid, ansatz_transform, build_grid, constraint_residual_inf,
    discretize_thooft, general_transform, mc_grid, mc_phi_errors, phi_boundary,
    robin_data, simple_example,
)
from adhm.fields import action_density, curvature, sd_residual

LAM_EXAMPLE = 1.0 / (4.0 * np.pi ** 2)


def smooth_real(y):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return 0.2 * (1.0 + y[:, 3] ** 2)


# ---------------------------------------------------------------- grids

def test_product_grid_invariants():
    g = build_grid(16, 16, 16)
    assert abs(g.weights.sum() - VOL_S3) < 1e-10
    assert np.max(np.abs(np.linalg.norm(g.nodes, axis=1) - 1.0)) < 1e-14
    assert np.max(np.abs(g.integrate(g.nodes))) < 1e-12
    # 1/|0 - y|^2 is identically 1 on the sphere
    assert g.integrate(1.0 / np.einsum("ij,ij->i", g.nodes, g.nodes)) == \
        pytest.approx(VOL_S3, abs=1e-10)


def test_product_grid_rejects_tiny_counts():
    with pytest.raises(ValueError):
        build_grid(1, 16, 16)


def test_mc_grid_basics():
    g1 = mc_grid(1, 42)
    assert g1.n == 1
    assert g1.weights[0] == pytest.approx(VOL_S3)
    a = mc_grid(500, 7)
    b = mc_grid(500, 7)
    assert np.array_equal(a.nodes, b.nodes)
    assert a.weights.sum() == pytest.approx(VOL_S3, abs=1e-12)
    # odd moment is only O(N^{-1/2})
    assert np.max(np.abs(a.integrate(a.nodes))) < 5 * VOL_S3 / np.sqrt(500)


def test_custom_grid_validation():
    with pytest.raises(ValueError):
        S3Grid(nodes=np.array([[0.5, 0, 0, 0]]), weights=np.array([1.0]),
               scheme="custom")
    with pytest.raises(ValueError):
        S3Grid(nodes=np.array([[1.0, 0, 0, 0]]), weights=np.array([-1.0]),
               scheme="custom")


# ------------------------------------------------------------- data type

def test_boundary_data_flags():
    g = build_grid(4, 4, 4)
    data = BoundaryData.from_function(g, smooth_real)
    assert data.real_flag
    assert np.allclose(data.real_values, smooth_real(g.nodes))
    quat_data = BoundaryData.from_function(
        g, lambda y: 0.1 * np.asarray(y, dtype=float))
    assert not quat_data.real_flag
    with pytest.raises(ValueError):
        quat_data.real_values
    with pytest.raises(ValueError):
        BoundaryData(grid=g, values=np.zeros((3, 4)))


def test_boundary_data_scaled_keeps_generator():
    g = build_grid(4, 4, 4)
    data = BoundaryData.from_function(g, smooth_real).scaled(0.5)
    assert np.allclose(data.values[:, 3], 0.5 * smooth_real(g.nodes))
    assert np.allclose(data.fn(g.nodes), 0.5 * smooth_real(g.nodes))


# ------------------------------------------------------- layer potential

def test_shell_theorem_constant_data():
    g = build_grid(16, 16, 16)
    L0 = 0.1
    data = BoundaryData.from_function(g, lambda y: np.full(len(y), L0))
    expected = 1.0 + VOL_S3 * L0 ** 2
    rng = np.random.default_rng(0)
    for _ in range(6):
        x = rng.normal(size=4)
        x *= 0.4 * rng.random() / np.linalg.norm(x)
        value, grad = phi_boundary(data, x)
        assert abs(value - expected) < 1e-9
        assert np.linalg.norm(grad) < 1e-8


def test_zero_data_gives_unit_phi():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, lambda y: np.zeros(len(y)))
    value, grad = phi_boundary(data, np.array([0.2, 0.1, 0.0, -0.3]))
    assert value == 1.0
    assert np.array_equal(grad, np.zeros(4))


def test_phi_requires_real_data():
    g = build_grid(4, 4, 4)
    data = BoundaryData.from_function(g, lambda y: 0.1 * np.asarray(y))
    with pytest.raises(ValueError):
        phi_boundary(data, np.zeros(4))


def test_phi_mc_vs_product():
    product = BoundaryData.from_function(build_grid(20, 20, 20), smooth_real)
    n = 10000
    mc = BoundaryData.from_function(mc_grid(n, 3), smooth_real)
    x = np.array([0.2, -0.1, 0.25, 0.1])
    v_prod = phi_boundary(product, x)[0]
    v_mc = phi_boundary(mc, x)[0]
    sigma = VOL_S3 / np.sqrt(n)
    assert 0.0 < abs(v_mc - v_prod) < 5 * sigma


def test_near_boundary_warning():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, smooth_real)
    with pytest.warns(AccuracyWarning):
        phi_boundary(data, np.array([0.0, 0.0, 0.0, 0.97]))
    with pytest.raises(ValueError):
        phi_boundary(data, np.array([0.0, 0.0, 0.0, 1.2]))


# ------------------------------------------------------ ansatz transform

def test_ansatz_transform_constant_and_zero():
    g = build_grid(16, 16, 16)
    const = BoundaryData.from_function(g, lambda y: np.full(len(y), 0.1))
    zero = BoundaryData.from_function(g, lambda y: np.zeros(len(y)))
    rng = np.random.default_rng(1)
    for _ in range(4):
        x = rng.normal(size=4)
        x *= 0.4 * rng.random() / np.linalg.norm(x)
        assert np.max(np.abs(ansatz_transform(const, x))) < 1e-8
        assert np.array_equal(ansatz_transform(zero, x), np.zeros((4, 4)))


def test_ansatz_transform_matches_potential_of_phi():
    # two code paths for the same field: quadrature inner products versus
    # the tensor contraction with the analytic gradient of phi
    g = build_grid(12, 12, 12)
    data = BoundaryData.from_function(g, smooth_real)
    prov = BoundaryHarmonic(data)
    rng = np.random.default_rng(2)
    for _ in range(6):
        x = rng.normal(size=4)
        x *= 0.7 * rng.random() ** 0.5 / np.linalg.norm(x)
        assert np.max(np.abs(ansatz_transform(data, x)
                             - ansatz_potential(prov, x))) < 1e-12


def test_ansatz_transform_self_dual():
    g = build_grid(16, 16, 16)
    data = BoundaryData.from_function(g, smooth_real)
    gt = GeneralTransform(data, None)
    rng = np.random.default_rng(3)
    for _ in range(3):
        x = rng.normal(size=4)
        x *= (0.3 + 0.3 * rng.random()) / np.linalg.norm(x)
        assert sd_residual(curvature(gt.potential, x, h=1e-3)) < 1e-4


def test_ansatz_requires_real_data():
    g = build_grid(4, 4, 4)
    data = BoundaryData.from_function(g, lambda y: 0.1 * np.asarray(y))
    with pytest.raises(ValueError):
        ansatz_transform(data, np.zeros(4))


# ------------------------------------------------------------ robin data

def test_robin_constant_shell():
    L0 = 0.1
    prov = ConstantHarmonic(1.0 + VOL_S3 * L0 ** 2)
    y = np.array([0.0, 0.6, 0.0, 0.8])
    assert robin_data(prov, y) == pytest.approx(L0 ** 2, abs=1e-15)
    assert robin_data(ConstantHarmonic(1.0), y) == 0.0
    with pytest.raises(ValueError):
        robin_data(prov, np.array([0.0, 0.3, 0.0, 0.4]))


class _BandLimitedSolution:
    """Interior solution for L(y) = c0 + c1 y4, via harmonic polynomials."""

    def __init__(self, c0, c1):
        self.c0, self.c1 = c0, c1

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        c0, c1 = self.c0, self.c1
        e4 = np.array([0.0, 0.0, 0.0, 1.0])
        r2 = x @ x
        value = (1.0 + VOL_S3 * (c0 ** 2 + c1 ** 2 / 4.0)
                 + VOL_S3 * c0 * c1 * x[3]
                 + (VOL_S3 / 3.0) * c1 ** 2 * (x[3] ** 2 - r2 / 4.0))
        grad = (VOL_S3 * c0 * c1 * e4
                + (VOL_S3 / 3.0) * c1 ** 2 * (2.0 * x[3] * e4 - x / 2.0))
        return value, grad


def test_robin_band_limited_round_trip():
    c0, c1 = 0.3, 0.2
    exact = _BandLimitedSolution(c0, c1)
    g = build_grid(16, 16, 16)
    data = BoundaryData.from_function(g, lambda y: c0 + c1 * y[:, 3])
    quad = BoundaryHarmonic(data)
    # the quadrature potential converges to the exact interior solution
    for x in (np.array([0.1, 0.2, -0.1, 0.3]), np.array([0.0, 0.0, 0.0, 0.5])):
        v1, g1 = exact.value_and_grad(x)
        v2, g2 = quad.value_and_grad(x)
        assert abs(v1 - v2) < 1e-8
        assert np.max(np.abs(g1 - g2)) < 1e-6
    # and its boundary limit recovers L^2 at the nodes
    rng = np.random.default_rng(4)
    for idx in rng.integers(0, g.n, size=10):
        y = g.nodes[idx]
        expected = (c0 + c1 * y[3]) ** 2
        assert robin_data(exact, y) == pytest.approx(expected, abs=1e-14)


def test_robin_interior_pole_closed_form():
    # an interior source contributes lam^2 (|p|^2 - 1) / (2 pi^2 |y-p|^4):
    # smooth on S and strictly negative, reflecting that interior
    # singularities are not layer-potential data
    p = np.array([0.2, 0.0, 0.0, 0.1])
    lam = 0.5
    prov = PoleSumHarmonic(p[None, :], [lam])
    g = build_grid(8, 8, 8)
    for y in g.nodes[::50]:
        d2 = float(np.sum((y - p) ** 2))
        expected = lam ** 2 * (float(p @ p) - 1.0) / (VOL_S3 * d2 ** 2)
        assert robin_data(prov, y) == pytest.approx(expected, rel=1e-12)
        assert robin_data(prov, y) < 0.0


def test_robin_mixed_field_dominated_by_shell():
    # shell data plus a weak interior source keeps the combination positive
    L0 = 0.3
    mixed = SumHarmonic(ConstantHarmonic(1.0 + VOL_S3 * L0 ** 2),
                        PoleSumHarmonic(np.array([[0.2, 0.0, 0.0, 0.1]]),
                                        [0.1], base=0.0))
    g = build_grid(8, 8, 8)
    vals = [robin_data(mixed, y) for y in g.nodes[::100]]
    assert all(v > 0 for v in vals)


# -------------------------------------------------------- discretization

def test_discretize_single_sample():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, lambda y: np.ones(len(y)))
    reduced = discretize_thooft(data, 1, seed=0)
    assert reduced.rank == 1
    assert reduced.L[0, 3] == pytest.approx(np.pi * np.sqrt(2.0))


def test_discretize_weight_identity():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, smooth_real)
    n = 200
    reduced = discretize_thooft(data, n, seed=1)
    lam2 = np.sum(reduced.L[:, 3] ** 2)
    sample_nodes = -reduced.M[np.arange(n), np.arange(n)]
    mean_l2 = np.mean(smooth_real(sample_nodes) ** 2)
    assert lam2 == pytest.approx(VOL_S3 * mean_l2, rel=1e-12)


def test_discretize_requires_function():
    g = build_grid(4, 4, 4)
    data = BoundaryData(grid=g, values=np.zeros((g.n, 4)))
    with pytest.raises(ValueError):
        discretize_thooft(data, 10, seed=0)


def test_mc_phi_convergence_rate():
    data = BoundaryData.from_function(build_grid(20, 20, 20),
                                      lambda y: 0.25 * (1.0 + 0.5 * y[:, 3]))
    rng = np.random.default_rng(42)
    pts = rng.normal(size=(12, 4))
    pts *= (0.45 * rng.random(12) ** 0.25 / np.linalg.norm(pts, axis=1))[:, None]
    errors, slope = mc_phi_errors(data, [100, 1000, 10000], seed=10, points=pts)
    assert all(e > 0 for e in errors)
    assert errors[0] > errors[2]
    assert -0.8 < slope < -0.2
    # determinism
    errors2, slope2 = mc_phi_errors(data, [100, 1000, 10000], seed=10, points=pts)
    assert errors == errors2 and slope == slope2


# ------------------------------------------------------------ constraint

def test_constraint_simple_example_closed_form():
    g = build_grid(10, 10, 10)
    data, kernel, _ = simple_example(LAM_EXAMPLE, g)
    assert constraint_residual_inf(data, kernel) < 1e-12


def test_constraint_refines_with_grid():
    res = []
    for n in (4, 6, 8):
        g = build_grid(n, n, n)
        data, kernel, _ = simple_example(LAM_EXAMPLE, g)
        res.append(constraint_residual_inf(data, kernel))
    assert all(r < 1e-12 for r in res)   # symmetric rule kills the moments


def test_constraint_zero_kernel_real_data():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, smooth_real)
    assert constraint_residual_inf(data, KernelP.zero(g)) < 1e-15


def test_constraint_zero_kernel_quaternionic_data():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, lambda y: np.asarray(y, dtype=float))
    G = qmul(qconj(data.values)[:, None, :], data.values[None, :, :])
    expected = np.sqrt(np.einsum("ijc,ijc->ij", G[..., :3], G[..., :3])).max()
    assert expected > 0.5
    assert constraint_residual_inf(data, KernelP.zero(g)) == \
        pytest.approx(expected, rel=1e-12)


def test_constraint_dense_matches_separable():
    g = build_grid(5, 5, 5)
    data, kernel, _ = simple_example(LAM_EXAMPLE, g)
    dense = KernelP.from_dense(g, kernel.to_dense())
    r1 = constraint_residual_inf(data, kernel, block=37)
    r2 = constraint_residual_inf(data, dense, block=64)
    assert abs(r1 - r2) < 1e-14


def test_constraint_grid_mismatch():
    g1, g2 = build_grid(4, 4, 4), build_grid(5, 5, 5)
    data = BoundaryData.from_function(g1, smooth_real)
    with pytest.raises(ValueError):
        constraint_residual_inf(data, KernelP.zero(g2))


# -------------------------------------------------------- simple example

def test_simple_example_parameters():
    g = build_grid(4, 4, 4)
    data, kernel, rho = simple_example(LAM_EXAMPLE, g)
    kappa2 = 2 * LAM_EXAMPLE - 2 * np.pi ** 2 * LAM_EXAMPLE ** 2
    assert kappa2 == pytest.approx(3.0 / (8.0 * np.pi ** 2))
    assert np.sqrt(kappa2) * np.pi * np.sqrt(2.0) == pytest.approx(np.sqrt(3) / 2)
    # size in the package normalization, and its volume-rescaled form
    assert rho == pytest.approx(1.0 / np.sqrt(3.0))
    assert rho * np.sqrt(VOL_S3) == pytest.approx(np.pi * np.sqrt(2.0 / 3.0))
    assert np.allclose(data.values, kappa2 ** 0.5 * g.nodes)


def test_simple_example_parameter_range():
    with pytest.raises(ValueError):
        simple_example(0.0, build_grid(4, 4, 4))
    with pytest.raises(ValueError):
        simple_example(1.0 / (2 * np.pi ** 2), build_grid(4, 4, 4))


def test_simple_example_size_limits():
    g = build_grid(4, 4, 4)
    small = simple_example(0.98 / (2 * np.pi ** 2), g)[2]
    large = simple_example(1e-4, g)[2]
    assert small < 0.05
    assert large > 10.0


# ----------------------------------------------------- general transform

def test_general_matches_ansatz_for_zero_kernel():
    g = build_grid(10, 10, 10)
    data = BoundaryData.from_function(g, smooth_real)
    rng = np.random.default_rng(5)
    for _ in range(4):
        x = rng.normal(size=4)
        x *= 0.6 * rng.random() / np.linalg.norm(x)
        a = general_transform(data, KernelP.zero(g), x)
        b = ansatz_transform(data, x)
        assert np.array_equal(a, b)


def test_general_zero_data():
    g = build_grid(6, 6, 6)
    data = BoundaryData.from_function(g, lambda y: np.zeros(len(y)))
    _, kernel, _ = simple_example(LAM_EXAMPLE, g)
    assert np.max(np.abs(general_transform(data, kernel,
                                           np.array([0.1, 0, 0, 0.2])))) < 1e-15


def test_general_separable_equals_dense():
    g = build_grid(6, 6, 6)
    data, kernel, _ = simple_example(LAM_EXAMPLE, g)
    dense = KernelP.from_dense(g, kernel.to_dense())
    gt_sep = GeneralTransform(data, kernel)
    gt_den = GeneralTransform(data, dense)
    rng = np.random.default_rng(6)
    for _ in range(3):
        x = rng.normal(size=4)
        x *= 0.5 * rng.random() / np.linalg.norm(x)
        assert np.max(np.abs(gt_sep.potential(x) - gt_den.potential(x))) < 1e-12


def test_general_field_radially_symmetric():
    g = build_grid(12, 12, 12)
    data, kernel, _ = simple_example(LAM_EXAMPLE, g)
    gt = GeneralTransform(data, kernel)
    rng = np.random.default_rng(7)
    r = 0.25
    values = []
    for _ in range(5):
        d = rng.normal(size=4)
        x = d * (r / np.linalg.norm(d))
        values.append(action_density(curvature(gt.potential, x, h=1e-3)))
    spread = (max(values) - min(values)) / min(values)
    assert spread < 1e-2


def test_general_profile_matches_sized_instanton():
    g = build_grid(16, 16, 16)
    data, kernel, rho = simple_example(LAM_EXAMPLE, g)
    gt = GeneralTransform(data, kernel)
    s0 = action_density(curvature(gt.potential, np.zeros(4), h=1e-3))
    for r in (0.15, 0.3):
        x = np.array([0.4, -0.3, 0.5, 0.45])
        x *= r / np.linalg.norm(x)
        s = action_density(curvature(gt.potential, x, h=1e-3))
        predicted = (rho ** 2 / (rho ** 2 + r ** 2)) ** 4
        assert s / s0 == pytest.approx(predicted, rel=5e-3)


# ----------------------------------------------------------- kernel type

def test_kernel_validation():
    g = build_grid(4, 4, 4)
    bad = np.zeros((g.n, g.n, 4))
    bad[0, 1] = ONE     # asymmetric
    with pytest.raises(ValueError):
        KernelP.from_dense(g, bad)
    f = np.tile(ONE, (g.n, 1))
    asym = [(g.nodes.copy(), f)]   # P_ij = y_i, not symmetric
    with pytest.raises(ValueError):
        KernelP.separable(g, asym)
    assert KernelP.zero(g).is_zero
    _, kernel, _ = simple_example(LAM_EXAMPLE, g)
    assert np.allclose(kernel.to_dense(),
                       np.swapaxes(kernel.to_dense(), 0, 1))
