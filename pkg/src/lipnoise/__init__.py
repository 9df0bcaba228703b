"""Optimal additive noise under Lipschitz indistinguishability constraints.

The library builds the minimum-variance noise densities whose log-density
gradient is bounded by epsilon in the norm dual to the chosen adjacency
(l1, l2, or per-block composite), samples from them reproducibly, and
certifies their optimality two independent ways: a dual ODE shooting
argument and a discretized linear program solved by an in-repo
interior-point method with exact crossover.
"""

from .audit import (
    AuditReport,
    LipschitzEstimate,
    MseEstimate,
    Verdict,
    cdf_lipschitz_audit,
    default_pairs,
    default_set_family,
    dp_ratio_audit,
    empirical_mse,
    lipschitz_estimate,
    lipschitz_report,
    postprocess_audit,
    radial_gof,
)
from .duals import (
    CertificateError,
    CertificateResult,
    DualResidualReport,
    DualTrajectory,
    Feasibility,
    SeparableDualReport,
    bisect_lambda_star,
    closed_form_dual_residual,
    closed_form_eta,
    inflection_point_1d,
    integrate_dual_1d,
    integrate_dual_radial,
    negative_branch_eta_1d,
    theoretical_lambda_star,
    verify_separable_dual,
)
from .lp import (
    DEFAULT_SCHEDULE,
    LpInstance,
    LpSolution,
    LpStatus,
    StudyRow,
    build_primal,
    check_dual_feasibility,
    convergence_study,
    duality_gap_report,
    solve,
)
from .mechanisms import (
    DensityModel,
    StaircaseModel,
    composite_log_density,
    density_model,
    exp_mechanism_density_1d,
    gaussian_model,
    l2_normalization,
    laplace1d_cdf,
    laplace1d_log_density,
    log_density,
    product_l1_log_density,
    radial_l2_log_density,
    sample,
    staircase_log_density_1d,
    theoretical_mse,
)
from .params import Adjacency, Grid1D, MechanismKind, MechanismSpec, PrivacyParams
from .quadrature import integrate_box_1d, integrate_even_box, normalization_check
from .rng import GENERATOR, STREAM_VERSION, master, stream

__version__ = "0.1.0"

__all__ = [
    "Adjacency",
    "AuditReport",
    "CertificateError",
    "CertificateResult",
    "DEFAULT_SCHEDULE",
    "DensityModel",
    "DualResidualReport",
    "DualTrajectory",
    "Feasibility",
    "GENERATOR",
    "Grid1D",
    "LipschitzEstimate",
    "LpInstance",
    "LpSolution",
    "LpStatus",
    "MechanismKind",
    "MechanismSpec",
    "MseEstimate",
    "PrivacyParams",
    "STREAM_VERSION",
    "SeparableDualReport",
    "StaircaseModel",
    "StudyRow",
    "Verdict",
    "bisect_lambda_star",
    "build_primal",
    "cdf_lipschitz_audit",
    "check_dual_feasibility",
    "closed_form_dual_residual",
    "closed_form_eta",
    "composite_log_density",
    "convergence_study",
    "default_pairs",
    "default_set_family",
    "density_model",
    "dp_ratio_audit",
    "duality_gap_report",
    "empirical_mse",
    "exp_mechanism_density_1d",
    "gaussian_model",
    "inflection_point_1d",
    "integrate_box_1d",
    "integrate_dual_1d",
    "integrate_dual_radial",
    "integrate_even_box",
    "l2_normalization",
    "laplace1d_cdf",
    "laplace1d_log_density",
    "lipschitz_estimate",
    "lipschitz_report",
    "log_density",
    "master",
    "negative_branch_eta_1d",
    "normalization_check",
    "postprocess_audit",
    "product_l1_log_density",
    "radial_gof",
    "radial_l2_log_density",
    "sample",
    "solve",
    "staircase_log_density_1d",
    "stream",
    "theoretical_lambda_star",
    "theoretical_mse",
    "verify_separable_dual",
]
