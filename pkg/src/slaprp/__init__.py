"""Exact branch-cut-and-price solver for the integrated storage location
assignment and picker routing problem, with five routing policies, compact
MILP exporters, brute-force verification oracles and a benchmark harness."""

from .model import (
    DEPOT,
    Instance,
    Layout,
    build_graph,
    generate_guo_instance,
    generate_random_instance,
    generate_silva_instance,
    load_instance,
    save_instance,
    validate_instance,
)
from .routing import POLICIES, RouteCost, evaluate_plan, route_cost
from .search import SolveStats, Solver, SolverConfig, solve

__all__ = [
    "DEPOT",
    "Instance",
    "Layout",
    "POLICIES",
    "RouteCost",
    "SolveStats",
    "Solver",
    "SolverConfig",
    "build_graph",
    "evaluate_plan",
    "generate_guo_instance",
    "generate_random_instance",
    "generate_silva_instance",
    "load_instance",
    "route_cost",
    "save_instance",
    "solve",
    "validate_instance",
]

__version__ = "0.1.0"
