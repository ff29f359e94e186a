"""Geometry of value-function spaces for finite MDPs and rectangular robust MDPs."""

from .games import maximin_row_mix
from .geometry import (
    Hyperplane,
    LVector,
    MembershipReport,
    agreement_slice_sample,
    hyperplane,
    intersect_policy_hyperplanes,
    l_vector,
    value_space_membership,
)
from .mdp import Mdp, evaluate_policy, policy_reward, policy_transition, validate_mdp
from .reduction import ReductionReport, extreme_points, reduce_uncertainty
from .robust import (
    RobustEvalResult,
    SARectangularSet,
    SRectangularSet,
    brute_force_robust_value,
    robust_bellman_apply,
    robust_evaluate_policy,
    robust_optimal_value,
    sa_to_s_rectangular,
)
from .robust_geometry import (
    ConicRegion,
    RegionBoundsReport,
    axis_line_interval,
    conic_membership,
    conic_region,
    region_bounds,
    robust_space_membership,
    robust_value_at_cone_intersection,
)

__version__ = "0.1.0"
