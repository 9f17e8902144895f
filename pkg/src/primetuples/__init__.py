"""Prime tuples, truncated divisor-sum weights and the threshold calculus for small prime gaps."""

from .errors import (
    BracketError,
    DegenerateWeight,
    InvalidArgument,
    NumericFailure,
    OutOfRange,
    PrimeTuplesError,
    ResourceLimit,
)
from .primes import PrimeTable, build_prime_table, cached_prime_table, segmented_sieve
from .tuples import HTuple, is_admissible, narrowest_admissible, nu_d, nu_p
from .singular_series import gallagher_ratio, singular_series
from .sieve_weights import (
    MomentReport,
    WeightParams,
    first_moment,
    generalized_von_mangoldt,
    lambda_R,
    lambda_R_weight,
    pair_correlation,
    rho_statistic,
    weighted_correlation,
)
from .thresholds import (
    bessel_threshold,
    condition_34,
    er_bounds,
    matrix_table,
    min_lambda,
    table_34,
    theta_threshold_matrix,
    weight_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "DegenerateWeight",
    "HTuple",
    "InvalidArgument",
    "MomentReport",
    "NumericFailure",
    "OutOfRange",
    "PrimeTable",
    "PrimeTuplesError",
    "ResourceLimit",
    "WeightParams",
    "bessel_threshold",
    "build_prime_table",
    "cached_prime_table",
    "condition_34",
    "er_bounds",
    "first_moment",
    "gallagher_ratio",
    "generalized_von_mangoldt",
    "is_admissible",
    "lambda_R",
    "lambda_R_weight",
    "matrix_table",
    "min_lambda",
    "narrowest_admissible",
    "nu_d",
    "nu_p",
    "pair_correlation",
    "rho_statistic",
    "segmented_sieve",
    "singular_series",
    "table_34",
    "theta_threshold_matrix",
    "weight_matrix",
    "weighted_correlation",
]
