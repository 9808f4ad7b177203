"""ADHM transform for SU(2) instantons and its boundary-data generalization."""

from adhm.quat import (
    quat, qmul, qconj, qinv, qabs, qnorm2, qre, qim,
    solve_right, SingularSystemError,
)
from adhm.finite import ADHMData, constraint_residual, solve_v, gauge_potential, thooft_data
from adhm.ansatz import (
    t_tensor, ConstantHarmonic, PoleSumHarmonic, SumHarmonic,
    pole_sum_phi, ansatz_potential,
)
from adhm.fields import (
    curvature, hodge_dual, sd_residual, action_density,
    ball_lattice, sample_field, FieldSample,
)
from adhm.boundary import (
    S3Grid, BoundaryData, KernelP, AccuracyWarning,
    build_grid, mc_grid, BoundaryHarmonic, phi_boundary,
    ansatz_transform, general_transform, GeneralTransform,
    robin_data, discretize_thooft, constraint_residual_inf,
    simple_example, mc_phi_errors,
)
from adhm.linearized import (
    c_operator, capital_phi, CapitalPhi, p_first_order,
    linearized_potential, linearized_potential_quat,
)

__all__ = [
    "quat", "qmul", "qconj", "qinv", "qabs", "qnorm2", "qre", "qim",
    "solve_right", "SingularSystemError",
    "ADHMData", "constraint_residual", "solve_v", "gauge_potential", "thooft_data",
    "t_tensor", "ConstantHarmonic", "PoleSumHarmonic", "SumHarmonic",
    "pole_sum_phi", "ansatz_potential",
    "curvature", "hodge_dual", "sd_residual", "action_density",
    "ball_lattice", "sample_field", "FieldSample",
    "S3Grid", "BoundaryData", "KernelP", "AccuracyWarning",
    "build_grid", "mc_grid", "BoundaryHarmonic", "phi_boundary",
    "ansatz_transform", "general_transform", "GeneralTransform",
    "robin_data", "discretize_thooft", "constraint_residual_inf",
    "simple_example", "mc_phi_errors",
    "c_operator", "capital_phi", "CapitalPhi", "p_first_order",
    "linearized_potential", "linearized_potential_quat",
]

__version__ = "0.1.0"
