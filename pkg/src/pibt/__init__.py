"""Priority Inheritance with Backtracking (PIBT) for iterative multi-agent path finding."""

from ._backend import NATIVE
from .engine import AgentState, InstrumentationCounters, step, update_priorities
from .graph import DistanceOracle, Graph, GridMap, build_grid_graph, check_cycle_condition, load_graph
from .mapd import DeliveryTask, TaskStream, run_mapd
from .mapf import MapfInstance, solve_mapf

__all__ = [
    "NATIVE",
    "AgentState",
    "DeliveryTask",
    "DistanceOracle",
    "Graph",
    "GridMap",
    "InstrumentationCounters",
    "MapfInstance",
    "TaskStream",
    "build_grid_graph",
    "check_cycle_condition",
    "load_graph",
    "run_mapd",
    "solve_mapf",
    "step",
    "update_priorities",
]
