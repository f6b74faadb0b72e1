"""evoctrl: a benchmark suite for self-adjusting mutation rates in
(1+1)-type evolutionary algorithms on OneMax and LeadingOnes."""

__version__ = "0.1.0"

from .algorithms import (  # noqa: F401
    EA_ALPHA,
    EA_GT0,
    RLS,
    RLS_OPT_LO,
    RLS_OPT_OM,
    AlgorithmConfig,
    ConfigurationError,
    RunRecord,
    run,
    update_rate,
)
from .core import (  # noqa: F401
    LEADINGONES,
    ONEMAX,
    LeadingOnes,
    OneMax,
    Problem,
    StepSizeDistribution,
    derive_rng,
    hamming_distance,
    make_problem,
    mutate,
    random_bitstring,
)
from .experiments import (  # noqa: F401
    GridResult,
    GridSpec,
    TraceAggregate,
    aggregate_traces,
    fraction_better,
    grid_search,
    repeat_runs,
)
from .theory import (  # noqa: F401
    fixed_target_time_leadingones,
    lo_improvement_prob,
    onemax_drift,
    optimal_step_leadingones,
    optimal_step_onemax,
    optimal_step_table,
    rls_expected_time_leadingones,
)
