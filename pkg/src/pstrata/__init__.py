"""Principal-stratum causal effects and surrogate evaluation from multiple trials."""

__version__ = "0.1.0"

from .bounds import (
    BoundsResult,
    bootstrap_bounds,
    mixture_bounds,
    psace_bounds_monotone,
    psace_bounds_nonmonotone,
)
from .em import EmConfig, EmResult, e_step, m_step, run_em
from .errors import (
    AbsentStratumError,
    EmptyArmError,
    NumericalError,
    ParameterError,
    PstrataError,
    RatioDegeneracyError,
    SupportError,
    UntestableModelError,
)
from .gibbs import (
    GibbsConfig,
    PosteriorDraws,
    draw_parameters,
    gelman_rubin,
    impute_strata,
    mode_count,
    run_gibbs,
    summarize,
)
from .identification import (
    IdentifiabilityReport,
    InversionResult,
    check_ratio_variation,
    invert_population_system,
    local_identifiability,
    moment_estimators_two_trials,
)
from .model import (
    ObservedCounts,
    ObservedDistribution,
    ParameterSet,
    PsaceSummary,
    Stratum,
    cell_probabilities,
    complete_log_likelihood,
    delta_from_vector,
    observed_distribution,
    observed_log_likelihood,
    pi_from_rows,
    population_distribution,
    psace_summary,
)
from .model_checking import (
    GofReport,
    degrees_of_freedom,
    lrt,
    posterior_predictive_p,
    saturated_log_likelihood,
)
from .rng import RngStream
from .sensitivity import (
    HierarchicalDraws,
    HierarchicalState,
    eta_full_conditional_logdensity,
    eta_mode,
    mis_step,
    run_hierarchical_gibbs,
    summarize_hierarchical,
)
from .simulation import EvalReport, Scenario, builtin_scenarios, evaluate, generate_dataset
from .surrogate import (
    SurrogateVerdict,
    evaluate_surrogate,
    paradox_check,
    predict_ace_y_bounds,
    predict_ace_y_monotone,
    sign_conclusion,
)
