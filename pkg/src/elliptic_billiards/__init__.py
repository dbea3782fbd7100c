"""Billiards in perturbed ellipses: caustics, exact eccentricity expansions,
non-degeneracy certification and deformed Fourier modes."""
from .billiard_dynamics import (
    BoundaryState, CausticOrbitSpec, RotationNumber, action_angle_phi, action_angle_theta, billiard_step,
    caustic_invariance, caustic_rotation_number, ellipse_caustic_orbit, integrability_residual, iterate,
    lambda_from_rotation, lazutkin_map, max_pq_gon, Xq_map,
)
from .deformed_modes import annihilation_test, basis_defect, capital_C_mode, deformed_mode, sobolev_inner
from .ellipse_geometry import (
    Ellipse, EllipticMotion, FourierSeries, PerturbedDomain, best_fit_ellipse, confocal_caustic,
    elliptic_motion_mu, moved_ellipse, reframe_perturbation,
)
from .errors import (
    BranchError, ConvexityError, DegenerateChartError, DomainError, GeometryError, NumericError, SearchError,
    SingularityError, StructuralError,
)
from .nondegeneracy import (
    build_concrete_system, build_even_matrix, build_odd_matrix, det_leading, inverse_row_orders, verify_all,
)
from .series_engine import (
    ExpansionSeries, RationalTrigPoly, XiPolynomial, compose_mu_expansion, expand_action_angle,
    fourier_condition_row, xi, xi_diagonal, xi_polynomials,
)
from .special_functions import complete_K, incomplete_F, jacobi_am_sn_cn

__version__ = "0.1.0"
