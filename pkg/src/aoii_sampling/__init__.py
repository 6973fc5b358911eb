"""Optimal sampling for tracking a two-state Markov machine under age of incorrect information."""

from .model import (
    Action,
    InadmissibleAction,
    InvalidParams,
    ModelParams,
    SysState,
    enumerate_states,
    step_cost,
    transitions,
    validate_params,
)
from .simulator import SimConfig, SimStats, empirical_distribution, simulate
from .solver import (
    NEVER_SAMPLES,
    ConvergenceError,
    DiscountedSolve,
    SolveResult,
    discounted_value_iteration,
    extract_policy,
    is_threshold,
    relative_value_iteration,
)
from .threshold import (
    StationaryDist,
    ThresholdPolicy,
    ThresholdSearchResult,
    lower_threshold_bound,
    optimal_threshold,
    stationary_distribution,
    threshold_average_cost,
    upper_threshold_bound,
)

__version__ = "0.1.0"
