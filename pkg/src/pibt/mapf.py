"""One-shot MAPF by iterating PIBT steps until every agent sits on its goal."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Sequence

from .engine import InstrumentationCounters, make_agents, step, update_priorities
from .graph import DistanceOracle, Graph, _default_oracle
from .scenario import Trace

DIAGNOSTIC_WINDOW = 50


class InstanceInvalid(ValueError):
    pass


class NotConverged(ValueError):
    pass


@dataclass
class MapfInstance:
    graph: Graph
    starts: list[int]
    goals: list[int]
    max_steps: int | None = None

    def validate(self) -> None:
        n = self.graph.node_count
        if len(self.starts) != len(self.goals):
            raise InstanceInvalid("starts and goals differ in length")
        if len(set(self.starts)) != len(self.starts):
            raise InstanceInvalid("duplicate start nodes")
        for v in (*self.starts, *self.goals):
            if not 0 <= v < n:
                raise InstanceInvalid(f"node {v} is not in the graph")

    @property
    def cutoff(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return max(1000, self.graph.diameter * len(self.starts) * 2)


@dataclass
class MapfResult:
    trace: Trace
    success: bool
    path_costs: list[int]
    makespan: int
    sum_of_costs: int
    runtime: float
    counters: list[InstrumentationCounters] = field(default_factory=list)
    diagnostics: dict[str, Any] | None = None

    def metrics(self) -> dict[str, Any]:
        """Deterministic summary (wall-clock runtime excluded)."""
        return {
            "mode": "mapf",
            "success": self.success,
            "agents": self.trace.n_agents,
            "steps": self.trace.final_step,
            "makespan": self.makespan,
            "sum_of_costs": self.sum_of_costs,
            "path_costs": self.path_costs,
            "max_counters": max_counters(self.counters),
            "diagnostics": self.diagnostics,
        }


def max_counters(counters: Sequence[InstrumentationCounters]) -> dict[str, int]:
    return {
        "pibt_calls": max((c.pibt_calls for c in counters), default=0),
        "backtracks": max((c.backtracks for c in counters), default=0),
        "node_evaluations": max((c.node_evaluations for c in counters), default=0),
    }


def compute_path_cost(trace: Trace, agent: int) -> int:
    """Earliest timestep from which ``agent`` stays on its goal to the end."""
    if trace.goals is None:
        raise ValueError("trace carries no goals")
    goal = trace.goals[agent]
    t = trace.final_step
    if trace.positions[t][agent] != goal:
        raise NotConverged(f"agent {agent} is not on its goal at the final step")
    while t > 0 and trace.positions[t - 1][agent] == goal:
        t -= 1
    return t


def first_visits(trace: Trace) -> list[int | None]:
    """First timestep each agent stood on its goal (``None`` if never)."""
    assert trace.goals is not None
    out: list[int | None] = [None] * trace.n_agents
    for t, pos in enumerate(trace.positions):
        for i, v in enumerate(pos):
            if out[i] is None and v == trace.goals[i]:
                out[i] = t
    return out


def solve_mapf(
    instance: MapfInstance,
    dist: DistanceOracle | None = None,
    backend: str = "auto",
    timeout: float | None = None,
    epsilon_seed: int | None = None,
) -> MapfResult:
    """Run PIBT until all agents are on their goals at once, or the cutoff.

    Goals never change; an agent pushed off its goal simply resumes heading
    back to it. Failure (livelock, unmet graph condition, timeout) is
    reported with the last few joint positions attached.
    """
    instance.validate()
    g = instance.graph
    if dist is None:
        dist = _default_oracle(g)
    dist.warm(set(instance.goals))
    agents = make_agents(instance.starts, instance.goals, epsilon_seed)
    goals = list(instance.goals)
    cutoff = instance.cutoff
    trace = Trace(goals=goals)
    counters: list[InstrumentationCounters] = []
    recent: deque[list[int]] = deque(maxlen=DIAGNOSTIC_WINDOW)

    pos = list(instance.starts)
    prev: list[int] | None = None
    elapsed = 0.0
    t = 0
    reason = None
    while True:
        events = [
            {"kind": "goal_reached", "agent": i}
            for i in range(len(pos))
            if pos[i] == goals[i] and (prev is None or prev[i] != goals[i])
        ]
        trace.append(pos, events)
        recent.append(pos)
        if pos == goals:
            break
        if t >= cutoff:
            reason = "max_steps"
            break
        if timeout is not None and elapsed > timeout:
            reason = "timeout"
            break
        tic = time.perf_counter()
        update_priorities(agents, t)
        nxt, c = step(agents, g, dist, backend=backend)
        for a, v in zip(agents, nxt):
            a.pos = v
        elapsed += time.perf_counter() - tic
        trace.counters[-1] = c.as_dict()
        counters.append(c)
        prev, pos = pos, nxt
        t += 1

    if reason is None:
        costs = [compute_path_cost(trace, i) for i in range(len(goals))]
        return MapfResult(trace, True, costs, t, sum(costs), elapsed, counters)
    diagnostics = {
        "reason": reason,
        "steps": t,
        "off_goal": [i for i in range(len(goals)) if pos[i] != goals[i]],
        "priorities": [str(a.priority) for a in agents],
        "recent_positions": list(recent),
    }
    return MapfResult(trace, False, [], t, 0, elapsed, counters, diagnostics)
