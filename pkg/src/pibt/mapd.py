"""Lifelong pickup-and-delivery on top of PIBT.

Free agents head for the nearest pickup of a visible, unassigned task and
claim it only once they stand on it. A claimed task sends its agent to the
delivery node; arriving there completes the task and frees the agent.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .engine import AgentState, InstrumentationCounters, make_agents, step, update_priorities
from .graph import DistanceOracle, Graph, _default_oracle, check_cycle_condition
from .mapf import max_counters
from .rng import SplitMix64
from .scenario import TaskSpec, Trace, issue_times

log = logging.getLogger(__name__)


@dataclass
class DeliveryTask:
    id: int
    pickup: int
    delivery: int
    issued_at: int
    assigned_at: int | None = None
    completed_at: int | None = None
    assignee: int | None = None

    @property
    def service_time(self) -> int | None:
        if self.completed_at is None:
            return None
        return self.completed_at - self.issued_at


@dataclass
class TaskStream:
    tasks: list[DeliveryTask]
    frequency: Fraction | None = None

    def __post_init__(self) -> None:
        self.tasks.sort(key=lambda task: (task.issued_at, task.id))

    @property
    def total(self) -> int:
        return len(self.tasks)

    @property
    def last_issue(self) -> int:
        return self.tasks[-1].issued_at if self.tasks else 0

    @classmethod
    def from_specs(cls, specs: Sequence[TaskSpec], frequency: Fraction | None = None) -> "TaskStream":
        return cls(
            [DeliveryTask(k, s.pickup, s.delivery, s.issued_at) for k, s in enumerate(specs)],
            frequency,
        )

    @classmethod
    def generate(
        cls, seed: int, frequency: Fraction | float | str, total: int, endpoints: Sequence[int]
    ) -> "TaskStream":
        rng = SplitMix64(seed)
        pool = sorted(set(endpoints))
        tasks = []
        for k, at in enumerate(issue_times(total, frequency)):
            pickup = rng.choice(pool)
            delivery = rng.choice(pool)
            while delivery == pickup:
                delivery = rng.choice(pool)
            tasks.append(DeliveryTask(k, pickup, delivery, at))
        return cls(tasks, Fraction(str(frequency)))


class StreamExhaustedButIncomplete(RuntimeError):
    """The step cutoff was hit with tasks still open; ``result`` has the partial run."""

    def __init__(self, message: str, result: "MapdResult"):
        super().__init__(message)
        self.result = result


@dataclass
class MapdResult:
    success: bool
    makespan: int
    service_times: list[int]
    runtime: float
    counters: list[InstrumentationCounters]
    trace: Trace
    tasks: list[DeliveryTask] = field(default_factory=list)

    def metrics(self) -> dict[str, Any]:
        lam = self.service_times
        return {
            "mode": "mapd",
            "success": self.success,
            "agents": self.trace.n_agents,
            "steps": self.trace.final_step,
            "makespan": self.makespan,
            "tasks": len(self.tasks),
            "completed": len(lam),
            "service_time_sum": sum(lam),
            "service_time_mean": round(sum(lam) / len(lam), 6) if lam else None,
            "service_time_max": max(lam, default=None),
            "max_counters": max_counters(self.counters),
        }


class MapdWorld:
    """Mutable simulation state; ``tick`` performs the per-timestep bookkeeping."""

    def __init__(
        self,
        graph: Graph,
        starts: Sequence[int],
        stream: TaskStream,
        dist: DistanceOracle | None = None,
        epsilon_seed: int | None = None,
    ):
        if len(set(starts)) != len(starts):
            raise ValueError("starts are not pairwise distinct")
        self.graph = graph
        self.dist = dist if dist is not None else _default_oracle(graph)
        self.agents: list[AgentState] = make_agents(starts, [None] * len(starts), epsilon_seed)
        for a in self.agents:
            a.free = True
        self.tasks = list(stream.tasks)
        self._next_reveal = 0
        self.open: list[DeliveryTask] = []  # visible, unassigned
        self.carrying: dict[int, DeliveryTask] = {}
        self.completed = 0

    def reveal(self, t: int) -> None:
        while self._next_reveal < len(self.tasks) and self.tasks[self._next_reveal].issued_at <= t:
            self.open.append(self.tasks[self._next_reveal])
            self._next_reveal += 1

    def complete_deliveries(self, t: int) -> list[dict[str, Any]]:
        events = []
        for a in self.agents:
            task = self.carrying.get(a.id)
            if task is not None and a.pos == task.delivery:
                task.completed_at = t
                del self.carrying[a.id]
                a.free = True
                a.set_goal(None)
                self.completed += 1
                events.append({"kind": "task_completed", "agent": a.id, "task": task.id})
        return events

    @property
    def done(self) -> bool:
        return self.completed == len(self.tasks)

    def tick(self, t: int) -> list[dict[str, Any]]:
        self.reveal(t)
        events = self.complete_deliveries(t)
        events += allocate_free_agents(self, t)
        # a task whose pickup equals its delivery completes on claim
        events += self.complete_deliveries(t)
        return events


def allocate_free_agents(world: MapdWorld, t: int) -> list[dict[str, Any]]:
    """Claim tasks whose pickup a free agent stands on, then point every other
    free agent at its nearest open pickup (ties: distance, then task id).

    Agents are processed in index order, so the lower index wins a contested
    claim. Free agents with nothing to chase get no goal.
    """
    events = []
    for a in world.agents:
        if not a.free:
            continue
        here = [task for task in world.open if task.pickup == a.pos]
        if not here:
            continue
        task = min(here, key=lambda x: x.id)
        world.open.remove(task)
        task.assigned_at = t
        task.assignee = a.id
        world.carrying[a.id] = task
        a.free = False
        a.set_goal(task.delivery)
        events.append({"kind": "task_assigned", "agent": a.id, "task": task.id})
    for a in world.agents:
        if not a.free:
            continue
        if world.open:
            table_cost = world.dist.cost
            best = min(world.open, key=lambda x: (table_cost(a.pos, x.pickup), x.id))
            a.set_goal(best.pickup)
        else:
            a.set_goal(None)
    return events


def default_cutoff(graph: Graph, n_agents: int, stream: TaskStream) -> int:
    return stream.last_issue + 2 * graph.diameter * (stream.total + n_agents) + 1000


def run_mapd(
    graph: Graph,
    starts: Sequence[int],
    stream: TaskStream,
    max_steps: int | None = None,
    dist: DistanceOracle | None = None,
    backend: str = "auto",
    epsilon_seed: int | None = None,
    timeout: float | None = None,
) -> MapdResult:
    """Simulate until every task in ``stream`` is delivered.

    Raises StreamExhaustedButIncomplete if ``max_steps`` (or ``timeout``
    seconds of planning) runs out first.
    """
    if not check_cycle_condition(graph):
        log.warning("graph violates the cycle condition; tasks may never complete")
    world = MapdWorld(graph, starts, stream, dist, epsilon_seed)
    dist = world.dist
    dist.warm({task.pickup for task in stream.tasks} | {task.delivery for task in stream.tasks})
    if max_steps is None:
        max_steps = default_cutoff(graph, len(starts), stream)
    trace = Trace()
    counters: list[InstrumentationCounters] = []
    elapsed = 0.0
    t = 0
    while True:
        tic = time.perf_counter()
        events = world.tick(t)
        elapsed += time.perf_counter() - tic
        trace.append([a.pos for a in world.agents], events)
        if world.done or t >= max_steps or (timeout is not None and elapsed > timeout):
            break
        tic = time.perf_counter()
        update_priorities(world.agents, t)
        nxt, c = step(world.agents, graph, dist, backend=backend)
        for a, v in zip(world.agents, nxt):
            a.pos = v
        elapsed += time.perf_counter() - tic
        trace.counters[-1] = c.as_dict()
        counters.append(c)
        t += 1

    lam = [task.service_time for task in world.tasks if task.service_time is not None]
    result = MapdResult(world.done, t, lam, elapsed, counters, trace, world.tasks)
    if not world.done:
        raise StreamExhaustedButIncomplete(
            f"{len(world.tasks) - world.completed} of {len(world.tasks)} tasks open at t={t}", result
        )
    return result
