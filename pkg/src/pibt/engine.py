"""One-timestep planner: dynamic priorities, candidate ordering, priority
inheritance with backtracking, and per-step instrumentation.

``step`` dispatches to the compiled kernel when it is available. The Python
functions below (``candidate_set``, ``pibt``) are the reference path and the
fallback; both produce the same joint move and the same counters.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _backend
from .graph import DistanceOracle, Graph, _default_oracle
from .rng import SplitMix64


class ConfigurationError(ValueError):
    pass


@dataclass
class AgentState:
    id: int
    pos: int
    goal: int | None
    epsilon: Fraction
    eta: int = 0
    # unassigned (MAPD); eta stays at zero while free
    free: bool = False
    goal_updated: bool = False

    @property
    def priority(self) -> Fraction:
        return self.eta + self.epsilon

    def set_goal(self, goal: int | None) -> None:
        if goal != self.goal:
            self.goal = goal
            self.goal_updated = True


def assign_epsilons(n_agents: int, seed: int | None = None) -> list[Fraction]:
    """Distinct tie-breakers in [0, 1): ``i / n`` or a seeded permutation of those."""
    ranks = list(range(n_agents))
    if seed is not None:
        SplitMix64(seed).shuffle(ranks)
    return [Fraction(r, max(n_agents, 1)) for r in ranks]


def make_agents(
    starts: Sequence[int], goals: Sequence[int | None], epsilon_seed: int | None = None
) -> list[AgentState]:
    eps = assign_epsilons(len(starts), epsilon_seed)
    return [
        AgentState(id=i, pos=s, goal=g, epsilon=eps[i])
        for i, (s, g) in enumerate(zip(starts, goals))
    ]


def update_priorities(agents: Sequence[AgentState], t: int) -> None:
    """Advance eta for every agent; ``priority`` is then ``eta + epsilon``.

    eta restarts at 0 at t=0, for free agents, on a goal change, and while an
    agent stands on its goal; otherwise it grows by one per timestep.
    """
    _epsilon_ranks(agents)
    for a in agents:
        if t == 0 or a.free or a.goal_updated or a.goal is None or a.pos == a.goal:
            a.eta = 0
        else:
            a.eta += 1
        a.goal_updated = False


_rank_cache: tuple[tuple[Fraction, ...], list[int]] = ((), [])


def _epsilon_ranks(agents: Sequence[AgentState]) -> list[int]:
    global _rank_cache
    eps = tuple(a.epsilon for a in agents)
    cached_eps, cached_ranks = _rank_cache
    if eps == cached_eps:
        return cached_ranks
    for a in agents:
        if not 0 <= a.epsilon < 1:
            raise ConfigurationError(f"epsilon {a.epsilon} outside [0, 1) (agent {a.id})")
    order = sorted(range(len(eps)), key=eps.__getitem__)
    ranks = [0] * len(eps)
    for r, i in enumerate(order):
        if r and eps[order[r - 1]] == eps[i]:
            raise ConfigurationError(f"duplicate epsilon {eps[i]} (agent {agents[i].id})")
        ranks[i] = r
    _rank_cache = (eps, ranks)
    return ranks


def priority_order(agents: Sequence[AgentState]) -> list[int]:
    """Agent indices, highest priority first (exact: eta, then epsilon rank)."""
    n = len(agents)
    ranks = _epsilon_ranks(agents)
    return sorted(range(n), key=lambda i: agents[i].eta * n + ranks[i], reverse=True)


@dataclass
class InstrumentationCounters:
    pibt_calls: int = 0
    backtracks: int = 0
    node_evaluations: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "pibt_calls": self.pibt_calls,
            "backtracks": self.backtracks,
            "node_evaluations": self.node_evaluations,
        }

    def violations(self, n_agents: int, max_degree: int) -> list[str]:
        """Names of the per-step complexity bounds this step exceeded."""
        out = []
        if self.pibt_calls > n_agents:
            out.append("pibt_calls")
        if self.backtracks > n_agents:
            out.append("backtracks")
        if self.node_evaluations > n_agents * (max_degree + 1):
            out.append("node_evaluations")
        return out


# ---------------------------------------------------------------------------
# interaction groups


@dataclass
class InteractionGroups:
    groups: list[list[int]]

    def group_of(self, agent: int) -> list[int]:
        for g in self.groups:
            if agent in g:
                return g
        raise KeyError(agent)


def compute_groups(agents: Sequence[AgentState], graph: Graph) -> InteractionGroups:
    """Union agents within two hops of each other (arc direction ignored)."""
    n = len(agents)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    at = {a.pos: i for i, a in enumerate(agents)}
    for i, a in enumerate(agents):
        near = {a.pos}
        frontier = {a.pos}
        for _ in range(2):
            frontier = {
                w for u in frontier for w in (*graph.neighbors[u], *graph.predecessors[u])
            } - near
            near |= frontier
        for u in near:
            j = at.get(u)
            if j is not None:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    buckets: dict[int, list[int]] = {}
    for i in range(n):
        buckets.setdefault(find(i), []).append(i)
    return InteractionGroups(sorted(buckets.values()))


# ---------------------------------------------------------------------------
# the recursive planner


@dataclass
class StepContext:
    agents: Sequence[AgentState]
    dist: DistanceOracle
    undecided: set[int]
    # node -> agent that reserved it for t+1
    occupied: dict[int, int] = field(default_factory=dict)
    next_pos: dict[int, int] = field(default_factory=dict)
    # node -> agent standing on it at t
    owner: dict[int, int] = field(default_factory=dict)
    counters: InstrumentationCounters = field(default_factory=InstrumentationCounters)

    @classmethod
    def start(cls, agents: Sequence[AgentState], dist: DistanceOracle) -> "StepContext":
        return cls(
            agents=agents,
            dist=dist,
            undecided=set(range(len(agents))),
            owner={a.pos: i for i, a in enumerate(agents)},
        )


def candidate_set(
    agent: AgentState, parent: AgentState | None, ctx: StepContext, graph: Graph
) -> list[int]:
    """Own node plus neighbors, minus reserved nodes and the parent's node, best first.

    Order: distance to goal (own node first for goal-less agents), then nodes
    not held by an undecided agent, then node index.
    """
    here = agent.pos
    nodes = (here, *graph.neighbors[here])
    ctx.counters.node_evaluations += len(nodes)
    excluded = parent.pos if parent is not None else None
    table = ctx.dist.table(agent.goal) if agent.goal is not None else None

    def key(v: int) -> tuple[int, int, int]:
        k = ctx.owner.get(v)
        occ = int(k is not None and k in ctx.undecided)
        primary = int(table[v]) if table is not None else int(v != here)
        return primary, occ, v

    return sorted((v for v in nodes if v not in ctx.occupied and v != excluded), key=key)


def pibt(i: int, j: int | None, ctx: StepContext, graph: Graph) -> bool:
    """Decide agent ``i``'s next node, inheriting priority from ``j`` if given.

    Returns True (valid) once a node is secured, False (invalid) when the
    agent is stuck and stays put.
    """
    ctx.undecided.discard(i)
    ctx.counters.pibt_calls += 1
    agent = ctx.agents[i]
    parent = ctx.agents[j] if j is not None else None
    for v in candidate_set(agent, parent, ctx, graph):
        if v in ctx.occupied:
            # claimed by a failed inheritance chain since the list was built
            continue
        ctx.occupied[v] = i
        ctx.next_pos[i] = v
        k = ctx.owner.get(v)
        if k is not None and k in ctx.undecided:
            ok = pibt(k, i, ctx, graph)
            ctx.counters.backtracks += 1
            if ok:
                return True
            continue
        return True
    ctx.next_pos[i] = agent.pos
    ctx.occupied[agent.pos] = i
    return False


def step(
    agents: Sequence[AgentState],
    graph: Graph,
    dist: DistanceOracle | None = None,
    backend: str = "auto",
    use_groups: bool = False,
) -> tuple[list[int], InstrumentationCounters]:
    """Plan the joint move from t to t+1. Priorities must already be updated.

    ``backend`` is ``"auto"``, ``"python"`` or ``"native"``. ``use_groups``
    plans each interaction group separately (Python path); the result is the
    same as planning them together.
    """
    if dist is None:
        dist = _default_oracle(graph)
    n = len(agents)
    if n == 0:
        return [], InstrumentationCounters()
    if backend == "native" and not _backend.NATIVE:
        raise RuntimeError("compiled kernels are not available")
    if backend != "python" and _backend.NATIVE and not use_groups:
        return _step_native(agents, graph, dist)

    ctx = StepContext.start(agents, dist)
    limit = sys.getrecursionlimit()
    if limit < 2 * n + 200:
        sys.setrecursionlimit(2 * n + 200)
    try:
        if use_groups:
            for group in compute_groups(agents, graph).groups:
                members = set(group)
                for i in priority_order(agents):
                    if i in members and i in ctx.undecided:
                        pibt(i, None, ctx, graph)
        else:
            for i in priority_order(agents):
                if i in ctx.undecided:
                    pibt(i, None, ctx, graph)
    finally:
        sys.setrecursionlimit(limit)
    return [ctx.next_pos[i] for i in range(n)], ctx.counters


def _step_native(
    agents: Sequence[AgentState], graph: Graph, dist: DistanceOracle
) -> tuple[list[int], InstrumentationCounters]:
    n = len(agents)
    goal_row = np.array(
        [dist.row_of(a.goal) if a.goal is not None else -1 for a in agents], dtype=np.int32
    )
    pos = np.fromiter((a.pos for a in agents), dtype=np.int32, count=n)
    order = np.array(priority_order(agents), dtype=np.int32)
    next_pos = np.empty(n, dtype=np.int32)
    counters = np.zeros(3, dtype=np.int64)
    _backend.pibt_step(
        graph.indptr, graph.indices, pos, goal_row, dist.matrix, order,
        graph.max_degree, next_pos, counters,
    )
    c = InstrumentationCounters(int(counters[0]), int(counters[1]), int(counters[2]))
    return next_pos.tolist(), c
