"""Brackets for randomized boundedness constants of finite operator families.

R-bounds (Rademacher), gamma-bounds (Gaussian) and l^2-bounds (square
functions) of families of matrices between finite-dimensional l^p spaces,
together with the 2-summing norms and cotype-2 constants they are tied to.
"""

from .ell2 import KG, compose_families, ell2_bound_search, ell2_duality_check, ell2_product_check, ell2_ratio
from .estimators import CONSTANTS, BoundEstimator, estimate_constant
from .gaussian import (
    SUDAKOV_K,
    McConfig,
    McEstimate,
    coord_gamma_bracket,
    expected_sup_mc,
    expsup_check,
    expsup_gamma_sq_bound,
    gamma_bound_search,
    gamma_ratio_mc,
    gaussian_moment_mc,
    komatsu_lower_tail,
    sudakov_check,
    theta,
    theta_floor,
)
from .pietsch import pietsch_upper
from .rademacher import cotype2_search, diag_c0_rbound, r_bound_search, r_ratio, rademacher_moment
from .search import SearchConfig
from .spaces import (
    INF,
    BoundEstimate,
    BudgetError,
    ContractError,
    DegenerateWitnessError,
    DomainError,
    OperatorFamily,
    SeqSpace,
    ShapeError,
    Witness,
    adjoint_family,
    apply,
    coordinate_family,
    diagonal_c0_family,
    embedding_family,
    load_family,
    make_family,
    norm,
    operator_norm,
    save_family,
    square_function_norm,
)
from .summing import cotype_ratio_bracket, gaussian_cotype2_search, pi2_search, pi21_search, weak_lq_norm

__version__ = "0.1.0"
