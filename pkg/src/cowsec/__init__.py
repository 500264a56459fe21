"""Security-bound analysis of the coherent one-way QKD protocol under a
zero-error soft-filtering eavesdropping attack: exact filtering probabilities,
a seeded Monte Carlo attack simulator, its closed-form renewal expectation
model, beam-splitting and discrimination baselines, and a constrained
parameter search producing key-rate and optimal-intensity curves."""

__version__ = "0.1.0"

from .analytic import StrategyPoint, TruncationError, enumerate_small, expected_statistics
from .optimizer import (
    Baseline,
    MixedStrategy,
    OptimizationResult,
    mixture_combine,
    optimal_alice_intensity,
    optimize_attack,
)
from .photonics import (
    INFINITE,
    MeanPhotonNumber,
    ProtocolParams,
    binary_entropy,
    click_probability,
    holevo_binary,
    transmittance,
    vacuum_search_success,
)
from .simulator import (
    AttackParams,
    Fate,
    RunStats,
    ScriptExhaustedError,
    SignalFate,
    SignalKind,
    dump_trace,
    estimate_strategy_point,
    generate_sequence,
    replay_with_outcomes,
    run_attack,
    stats_to_point,
    structural_visibility_check,
)
from .soft_filter import (
    InfeasibilityError,
    SFOutcomeProbs,
    StageAggregates,
    generic_success_probability,
    sf1_probs,
    sf2_probs,
    stage_aggregates,
    unitarity_residual,
)
from .strategies import (
    ConstraintResiduals,
    StatisticsMode,
    bob_reference_click_rate,
    bs_point,
    constraint_residuals,
    key_rate,
    passthrough_point,
    strategy_click_rate,
    usd_feasibility_threshold,
    usd_like_point,
)

__all__ = [
    "AttackParams",
    "Baseline",
    "ConstraintResiduals",
    "Fate",
    "INFINITE",
    "InfeasibilityError",
    "MeanPhotonNumber",
    "MixedStrategy",
    "OptimizationResult",
    "ProtocolParams",
    "RunStats",
    "SFOutcomeProbs",
    "ScriptExhaustedError",
    "SignalFate",
    "SignalKind",
    "StageAggregates",
    "StatisticsMode",
    "StrategyPoint",
    "TruncationError",
    "binary_entropy",
    "bob_reference_click_rate",
    "bs_point",
    "click_probability",
    "constraint_residuals",
    "dump_trace",
    "enumerate_small",
    "estimate_strategy_point",
    "expected_statistics",
    "generate_sequence",
    "generic_success_probability",
    "holevo_binary",
    "key_rate",
    "mixture_combine",
    "optimal_alice_intensity",
    "optimize_attack",
    "passthrough_point",
    "replay_with_outcomes",
    "run_attack",
    "sf1_probs",
    "sf2_probs",
    "stage_aggregates",
    "stats_to_point",
    "strategy_click_rate",
    "structural_visibility_check",
    "transmittance",
    "unitarity_residual",
    "usd_feasibility_threshold",
    "usd_like_point",
    "vacuum_search_success",
]
