"""Unbalanced optimal transport on manifolds.

Discrete entropy-transport problems (solver, duality diagnostics), the
cone geometry behind the Wasserstein-Fisher-Rao distance, Monge couples
with their generalized Monge-Ampere residual, polar factorization of cone
automorphisms, and a regularity checker for radial costs on model spaces.
"""

from .cone import ConePoint, ConeTangent, cone_distance, cone_exp, lift_masses
from .entropy import (
    DiscreteMeasure,
    EntropyFunction,
    align_measures,
    csiszar_divergence,
    csiszar_masses,
    make_kl_entropy,
    make_tv_entropy,
)
from .errors import (
    AdmissibilityError,
    BranchCutError,
    DegenerateInputError,
    DomainError,
    FeasibilityError,
    InvalidInputError,
    NumericalError,
    SchemaError,
    SingularityError,
    UotError,
)
from .manifold import (
    GridDensity,
    Space,
    circle,
    euclidean,
    exp_map,
    geodesic_distance,
    hyperbolic,
    log_map,
    sphere,
)
from .monge import (
    TransportCouple,
    c_exp,
    ma_residual,
    monge_couple_from_potential,
    monge_objective,
    pushforward,
)
from .mtw import (
    MtwCoefficients,
    RadialCost,
    j_orthogonalize,
    lee_li_derivatives,
    lee_li_functions,
    mtw_coefficients,
    mtw_condition_check,
    mtw_decomposed,
    mtw_fd_tensor,
    quadratic_radial_cost,
    wfr_radial_cost,
)
from .polar import (
    GeneralizedAutomorphism,
    PolarFactorization,
    act,
    compose,
    from_couple,
    identity_automorphism,
    is_volume_preserving,
    polar_factorize,
    projection_distance,
    random_volume_preserver,
)
from .solver import (
    CostMatrix,
    CostSpec,
    Plan,
    PotentialPair,
    Schedule,
    SemiCoupling,
    Solution,
    admissibility,
    c_transform,
    convex_oracle,
    cost_matrix,
    dual_objective,
    linearized_marginals,
    primal_objective,
    quadratic_cost,
    semicoupling_value,
    solve_entropic,
    solve_semicoupling_small,
    wfr_cost,
    wfr_two_diracs,
)

__version__ = "1.0.0"
