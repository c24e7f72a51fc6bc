"""Numerical laboratory for K-functional inequalities on finite atomic spaces.

The package covers five areas: weighted lattice norms with p-convexification
(:mod:`caldera.lattice`), exact and numerical K- and D-functionals with the
associated inequality checks (:mod:`caldera.kfunc`), majorization transport
building positive substochastic operators (:mod:`caldera.majorize`), dominated
extension of those operators through a sublinear majorant
(:mod:`caldera.extend`), and reproducible random campaigns with a command
line front end (:mod:`caldera.campaign`, :mod:`caldera.cli`).
"""

from .errors import (
    CapacityError,
    DimensionMismatch,
    DomainError,
    InternalConsistencyError,
    NumericalFailure,
)
from .lattice import (
    INF,
    Convexified,
    Couple,
    LatticeVector,
    MeasureSpace,
    WeightedP,
    abs_vector,
    convexify,
    convexify_couple,
    effective_exponent,
    lub,
    norm,
    power_vector,
    sign_multiply,
    support,
    vector,
)
from .kfunc import (
    Decomposition,
    KProfile,
    check_d_power_sandwich,
    check_k_d_sandwich,
    check_k_power_sandwich,
    d_exact,
    default_t_grid,
    k_exact_l1_linf,
    k_numeric,
    k_order_dominates,
    profile,
)
from .majorize import (
    MatrixOperator,
    construct_positive_operator,
    decreasing_rearrangement,
    fill_to_exact_majorization,
    operator_norm_1,
    operator_norm_inf,
    sample_operator_norm,
    t_transform_chain,
    weak_submajorizes,
    weighted_weak_submajorizes,
)
from .extend import (
    LiftResult,
    SublinearMajorant,
    apply_majorant,
    check_minkowski,
    check_sublinear,
    default_alpha,
    greedy_hb_extension_row,
    holder_extension_row,
    lift_operator,
    verify_lift,
)
from .instances import (
    Instance,
    generate_instance,
    instance_from_json,
    instance_to_json,
    load_instance,
    save_instance,
)
from .campaign import (
    CampaignConfig,
    CampaignReport,
    load_config,
    parse_config,
    run_campaign,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DimensionMismatch",
    "DomainError",
    "InternalConsistencyError",
    "NumericalFailure",
    "INF",
    "Convexified",
    "Couple",
    "LatticeVector",
    "MeasureSpace",
    "WeightedP",
    "abs_vector",
    "convexify",
    "convexify_couple",
    "effective_exponent",
    "lub",
    "norm",
    "power_vector",
    "sign_multiply",
    "support",
    "vector",
    "Decomposition",
    "KProfile",
    "check_d_power_sandwich",
    "check_k_d_sandwich",
    "check_k_power_sandwich",
    "d_exact",
    "default_t_grid",
    "k_exact_l1_linf",
    "k_numeric",
    "k_order_dominates",
    "profile",
    "MatrixOperator",
    "construct_positive_operator",
    "decreasing_rearrangement",
    "fill_to_exact_majorization",
    "operator_norm_1",
    "operator_norm_inf",
    "sample_operator_norm",
    "t_transform_chain",
    "weak_submajorizes",
    "weighted_weak_submajorizes",
    "LiftResult",
    "SublinearMajorant",
    "apply_majorant",
    "check_minkowski",
    "check_sublinear",
    "default_alpha",
    "greedy_hb_extension_row",
    "holder_extension_row",
    "lift_operator",
    "verify_lift",
    "Instance",
    "generate_instance",
    "instance_from_json",
    "instance_to_json",
    "load_instance",
    "save_instance",
    "CampaignConfig",
    "CampaignReport",
    "load_config",
    "parse_config",
    "run_campaign",
    "__version__",
]
