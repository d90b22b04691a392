"""Exact and simulated absorption times for lazy random walkers on graphs."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("lazywalk")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .chain import (
    AbsorbingChain,
    AgentClass,
    Capture,
    ChainError,
    Distancing,
    Gathering,
    InfeasibleGoalError,
    LazinessPolicy,
    Ownership,
    StateCapError,
    build_chain,
    enumerate_states,
    step_distribution,
)
from .graph import (
    Graph,
    GraphError,
    build_complete,
    build_cycle,
    build_grid,
    build_line,
    parse_edge_list,
    parse_graph_spec,
)
from .optimize import OptResult, SaddleResult, find_root, find_saddle, minimize_2d, minimize_scalar
from .simulate import SimConfig, SimResult, simulate, sweep_p
from .solver import (
    NonAbsorbingError,
    SolveReport,
    absorption_probabilities,
    absorption_times,
    solve,
)

__all__ = [
    "AbsorbingChain", "AgentClass", "Capture", "ChainError", "Distancing", "Gathering",
    "Graph", "GraphError", "InfeasibleGoalError", "LazinessPolicy", "NonAbsorbingError",
    "OptResult", "Ownership", "SaddleResult", "SimConfig", "SimResult", "SolveReport",
    "StateCapError", "absorption_probabilities", "absorption_times", "build_chain",
    "build_complete", "build_cycle", "build_grid", "build_line", "enumerate_states",
    "find_root", "find_saddle", "minimize_2d", "minimize_scalar", "parse_edge_list",
    "parse_graph_spec", "simulate", "solve", "step_distribution", "sweep_p",
]
