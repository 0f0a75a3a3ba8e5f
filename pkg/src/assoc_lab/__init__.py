"""Simulation lab for higher-order sparse associative memories.

Three model families over sparse 0/1 patterns (Amari sum weights,
Willshaw clipped weights, and the block-coded GB architecture) with
their one-step retrieval dynamics and a Monte Carlo harness for probing
storage-capacity scalings.
"""

from .combinatorics import COUNT_MAX, binomial, falling_factorial, log_binomial
from .dynamics import (
    FixedPointReport,
    ThresholdValue,
    a_delta_holds,
    is_fixed_point,
    one_step,
    threshold_for,
)
from .errors import (
    AmbiguousComparisonError,
    AssocLabError,
    BudgetExceededError,
    CapacityCapError,
    ConfigError,
    ConventionError,
    CountOverflowError,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    TrialError,
)
from .experiments import (
    DEFAULT_CAPACITY_CAP,
    CapacityFamily,
    CapacityRule,
    StabilityEstimate,
    SweepRecord,
    TrialResult,
    capacity_for,
    estimate_stability,
    family_for,
    iter_sweep,
    run_stability_trial,
    sweep,
    wilson_interval,
)
from .fields import (
    DEFAULT_BUDGET,
    Convention,
    FieldEstimate,
    FieldVector,
    FixedOrder,
    LogarithmicOrder,
    ModelKind,
    ModelSpec,
    field_amari,
    field_gb,
    field_gb_montecarlo,
    field_gb_upper_bound,
    field_oracle,
    field_willshaw,
)
from .patterns import (
    Bernoulli,
    BlockLayout,
    FixedWeight,
    GBBlock,
    PatternEnsemble,
    SparsePattern,
    default_sparsity,
    ensemble_from_text,
    ensemble_to_text,
    gen_bernoulli,
    gen_fixed_weight,
    gen_gb,
    overlap,
    read_ensemble,
    write_ensemble,
)

__version__ = "0.1.0"
