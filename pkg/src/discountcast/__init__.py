"""Discount allocation for influence maximization on social networks.

Offers come from a fixed menu of discount rates; each user accepts an
offer with a known rate-dependent probability, and accepted users seed
an independent cascade. The package provides exact and Monte Carlo
spread evaluation, non-adaptive configuration search under hard or soft
budgets, adaptive probing policies with partial cascade observation,
brute-force and backward-induction oracles for small instances, and a
CLI for reproducible experiments.
"""

__version__ = "0.1.0"

from .adaptive import (
    BranchConfig,
    BranchEstimator,
    EnhancedFactory,
    EnhancedGreedyPolicy,
    EstimatorConfig,
    GreedyFactory,
    GreedyPolicy,
    IteratedFactory,
    IteratedHeuristicPolicy,
    PolicyState,
    ProbeRecord,
    SpreadEstimator,
    TrajectoryRecord,
    enumerate_conditional_realizations,
    evaluate_policy,
    initial_state,
    optimal_policy_oracle,
    run_policy,
    sample_conditional_realization,
)
from .cascade import (
    DiffusionRealization,
    PartialObservation,
    Realization,
    SeedingRealization,
    conditional_spread,
    hoeffding_radius,
    load_realization,
    reachable,
    reveal_cascade,
    sample_diffusion,
    sample_realization,
    sample_seeding,
    spread_exact,
    spread_mc,
    write_realization,
)
from .errors import ParseError, PolicyContractError, TooLargeError, ValidationError
from .generators import (
    fig1_instance,
    fig2_realization,
    random_instance,
    worstcase_instance,
    write_instance,
)
from .graph import (
    AdoptionModel,
    DiscountMenu,
    Edge,
    Instance,
    SeedDiscountPair,
    SocialGraph,
    load_adoption,
    load_graph,
    load_instance,
)
from .nonadaptive import (
    BudgetSpec,
    Configuration,
    ExactEvaluator,
    MCEvaluator,
    brute_force_config,
    config_cost,
    f_exact,
    f_mc,
    hill_climbing,
    seedset_probability,
)

__all__ = [
    "AdoptionModel",
    "BranchConfig",
    "BranchEstimator",
    "BudgetSpec",
    "Configuration",
    "DiffusionRealization",
    "DiscountMenu",
    "Edge",
    "EnhancedFactory",
    "EnhancedGreedyPolicy",
    "EstimatorConfig",
    "ExactEvaluator",
    "GreedyFactory",
    "GreedyPolicy",
    "Instance",
    "IteratedFactory",
    "IteratedHeuristicPolicy",
    "MCEvaluator",
    "ParseError",
    "PartialObservation",
    "PolicyContractError",
    "PolicyState",
    "ProbeRecord",
    "Realization",
    "SeedDiscountPair",
    "SeedingRealization",
    "SocialGraph",
    "SpreadEstimator",
    "TooLargeError",
    "TrajectoryRecord",
    "ValidationError",
    "brute_force_config",
    "conditional_spread",
    "config_cost",
    "enumerate_conditional_realizations",
    "evaluate_policy",
    "f_exact",
    "f_mc",
    "fig1_instance",
    "fig2_realization",
    "hill_climbing",
    "hoeffding_radius",
    "initial_state",
    "load_adoption",
    "load_graph",
    "load_instance",
    "load_realization",
    "optimal_policy_oracle",
    "random_instance",
    "reachable",
    "reveal_cascade",
    "run_policy",
    "sample_conditional_realization",
    "sample_diffusion",
    "sample_realization",
    "sample_seeding",
    "seedset_probability",
    "spread_exact",
    "spread_mc",
    "worstcase_instance",
    "write_instance",
    "write_realization",
]
