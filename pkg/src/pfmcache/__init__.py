"""Discrete-time simulator for caching foundation models at edge servers.

Models are numeric profiles (memory, compute, in-context accuracy curve);
requests are served at the edge or offloaded to the cloud, and in-context
examples accumulate per (service, model) pair as requests are served.
"""

from .catalog import (
    CostCoefficients,
    ModelProfile,
    ScenarioConfig,
    ScenarioError,
    ServerProfile,
    ServiceProfile,
    default_catalog,
    default_scenario,
    validate_scenario,
)
from .context import ContextState, accuracy, effective_examples, update_context
from .cost import CostBreakdown, SlotDecision, average_objective, slot_cost
from .engine import ConstraintViolation, RunReport, SweepReport, generate_requests, run, step, sweep
from .policy import PolicyKind, knapsack_exact, knapsack_greedy

__all__ = [
    "ConstraintViolation", "ContextState", "CostBreakdown", "CostCoefficients", "ModelProfile",
    "PolicyKind", "RunReport", "ScenarioConfig", "ScenarioError", "ServerProfile",
    "ServiceProfile", "SlotDecision", "SweepReport", "accuracy", "average_objective",
    "default_catalog", "default_scenario", "effective_examples", "generate_requests",
    "knapsack_exact", "knapsack_greedy", "run", "slot_cost", "step", "sweep",
    "update_context", "validate_scenario",
]
