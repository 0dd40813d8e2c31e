"""Dimension theory of planar self-affine systems."""
from .matrix_core import Mat2, ProjPoint, SingularMatrixError, angle, restricted_norm, singular_values, word_product
from .pressure import BudgetExceededError, NonContractingError, affinity_dimension, finite_pressure, phi_s
from .splitting import (
    Cone,
    SplittingCertificate,
    SplittingFailure,
    estimate_domination,
    find_backward_invariant_multicone,
    stable_direction,
    strong_stable_direction,
)
from .thermo import CylinderMeasure, Potential, ThermoReport, gibbs_measure, thermo_report
from .dimension import ess_dimension, ledrappier_young, lyapunov_dimension
from .transversality import certify_translation_transversality, class_membership, s_map
from .geometry import AffineIFS, box_dimension_estimate, check_ssc, point_cloud

__version__ = "0.1.0"
