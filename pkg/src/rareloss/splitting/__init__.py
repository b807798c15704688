"""Dynamic splitting on gamma-subordinated embeddings of the static models."""

from .adaptive import adaptive_levels
from .embedding import (
    DECREASING,
    INCREASING,
    EmbeddingPlan,
    build_embedding,
    embed,
    embed_decreasing,
    embed_increasing,
    sample_embedded_losses,
)
from .estimators import (
    SplittingRun,
    ds_estimate,
    fixed_effort_estimate,
    fixed_effort_run,
    fixed_factor_estimate,
    fixed_factor_run,
)
from .ideal import ideal_case_stats, optimal_splitting_factor, simulate_ideal_branching
from .schedule import LevelSchedule
from .subordinator import SubordinatorState, gamma_bridge, simulate_at_times, subordinator_step

__all__ = [
    "DECREASING", "INCREASING", "EmbeddingPlan", "LevelSchedule", "SplittingRun", "SubordinatorState",
    "adaptive_levels", "build_embedding", "ds_estimate", "embed", "embed_decreasing", "embed_increasing",
    "fixed_effort_estimate", "fixed_effort_run", "fixed_factor_estimate", "fixed_factor_run",
    "gamma_bridge", "ideal_case_stats", "optimal_splitting_factor", "sample_embedded_losses",
    "simulate_at_times", "simulate_ideal_branching", "subordinator_step",
]
