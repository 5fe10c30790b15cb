"""Random-sum central limit toolkit.

Numerical building blocks for studying sums of a random number of
independent summands from triangular arrays: scalar distributions and
random indices, array constructions, classical and randomized CLT
condition functionals, probability metrics (Kolmogorov and Zolotarev),
and a seeded Monte Carlo study engine.
"""

from .arrays import (
    ArrayError,
    RowValidation,
    SeriesForm,
    TriangularArray,
    array_from_config,
    from_series,
    make_iid_array,
    make_rare_jump_array,
    make_shiryaev_array,
    normal_twin,
    shiryaev_series,
    validate,
)
from .conditions import (
    ConditionReport,
    InequalityCheck,
    InvalidRowError,
    RandomizedValue,
    cf_deviation,
    cf_domination,
    evaluate_report,
    feller,
    implication_suite,
    infinitesimality,
    infinitesimality_ratio,
    lindeberg,
    lyapunov,
    randomized,
    randomized_detailed,
    rl_normal_bound,
    rotar,
    rotar_error_bound,
    series_implication_suite,
    sigma_star,
)
from .distributions import (
    CenteredExponential,
    Deterministic,
    DistributionError,
    FiniteDiscrete,
    FiniteIndex,
    Geometric,
    Normal,
    QuadratureError,
    Rademacher,
    RandomIndex,
    ScalarDistribution,
    Scaled,
    Shifted,
    ShiftedNegativeBinomial,
    ShiftedPoisson,
    TwoPoint,
    Uniform,
    distribution_from_config,
    index_from_config,
    scale,
    shift,
)
from .engine import (
    BUILTIN_PLAN_NAMES,
    StudyPlan,
    StudyResult,
    builtin_plan,
    empirical_delta,
    run_study,
    sample_random_sum,
    sample_random_sums,
    selfcheck,
    selfcheck_json,
    spawn_streams,
)
from .metrics import (
    ConvolutionError,
    DistanceEstimate,
    MixtureLaw,
    MomentMismatchError,
    SumLaw,
    delta_mixture,
    delta_randomsum,
    dkw_bound,
    empirical_kolmogorov,
    kolmogorov,
    row_sum_law,
    semi_additivity_check,
    sum_of_independent,
    zeta,
    zeta_lower_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayError",
    "BUILTIN_PLAN_NAMES",
    "CenteredExponential",
    "ConditionReport",
    "ConvolutionError",
    "Deterministic",
    "DistanceEstimate",
    "DistributionError",
    "FiniteDiscrete",
    "FiniteIndex",
    "Geometric",
    "InequalityCheck",
    "InvalidRowError",
    "MixtureLaw",
    "MomentMismatchError",
    "Normal",
    "QuadratureError",
    "Rademacher",
    "RandomIndex",
    "RandomizedValue",
    "RowValidation",
    "ScalarDistribution",
    "Scaled",
    "SeriesForm",
    "Shifted",
    "ShiftedNegativeBinomial",
    "ShiftedPoisson",
    "StudyPlan",
    "StudyResult",
    "SumLaw",
    "TriangularArray",
    "TwoPoint",
    "Uniform",
    "array_from_config",
    "builtin_plan",
    "cf_deviation",
    "cf_domination",
    "delta_mixture",
    "delta_randomsum",
    "distribution_from_config",
    "dkw_bound",
    "empirical_delta",
    "empirical_kolmogorov",
    "evaluate_report",
    "feller",
    "from_series",
    "implication_suite",
    "index_from_config",
    "infinitesimality",
    "infinitesimality_ratio",
    "kolmogorov",
    "lindeberg",
    "lyapunov",
    "make_iid_array",
    "make_rare_jump_array",
    "make_shiryaev_array",
    "normal_twin",
    "randomized",
    "randomized_detailed",
    "rl_normal_bound",
    "rotar",
    "rotar_error_bound",
    "row_sum_law",
    "run_study",
    "sample_random_sum",
    "sample_random_sums",
    "scale",
    "selfcheck",
    "selfcheck_json",
    "semi_additivity_check",
    "series_implication_suite",
    "shift",
    "shiryaev_series",
    "sigma_star",
    "spawn_streams",
    "sum_of_independent",
    "validate",
    "zeta",
    "zeta_lower_bound",
    "__version__",
]
