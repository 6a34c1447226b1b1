"""Declarative security-test orchestration over a deterministic simulated RAN."""
from .config import (
    ChannelSpec,
    ComponentSpec,
    Diagnostic,
    ExecutionPlan,
    PlanError,
    ScenarioError,
    ScenarioSpec,
    build_plan,
    derive_component_seed,
    load_scenario,
    parse_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec",
    "ComponentSpec",
    "Diagnostic",
    "ExecutionPlan",
    "PlanError",
    "ScenarioError",
    "ScenarioSpec",
    "build_plan",
    "derive_component_seed",
    "load_scenario",
    "parse_scenario",
]
