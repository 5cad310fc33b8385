"""Graph generators and brute-force oracles shared by the test modules."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from pibt import _backend
from pibt.engine import AgentState
from pibt.graph import Graph, GridMap, build_grid_graph

native_only = pytest.mark.skipif(not _backend.NATIVE, reason="compiled kernels not built")


def open_grid(width: int, height: int) -> Graph:
    return build_grid_graph(GridMap.from_rows(["." * width] * height))


def directed_ring(n: int) -> Graph:
    return Graph.from_edges(n, arcs=[(i, (i + 1) % n) for i in range(n)])


def random_biconnected(n: int, rng: random.Random, chords: int | None = None) -> Graph:
    """Hamiltonian cycle over shuffled nodes plus random chords (n >= 3)."""
    order = list(range(n))
    rng.shuffle(order)
    edges = {tuple(sorted((order[i], order[(i + 1) % n]))) for i in range(n)}
    for _ in range(rng.randint(0, n) if chords is None else chords):
        u, v = rng.sample(range(n), 2)
        edges.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, edges=sorted(edges))


def random_connected(n: int, rng: random.Random, extra: int | None = None) -> Graph:
    """Random spanning tree plus a few extra edges; bridges are likely."""
    edges = set()
    for v in range(1, n):
        u = rng.randrange(v)
        edges.add((u, v))
    for _ in range(rng.randint(0, n // 2) if extra is None else extra):
        u, v = rng.sample(range(n), 2)
        edges.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, edges=sorted(edges))


def random_strongly_connected(n: int, rng: random.Random) -> Graph:
    """Directed ring over shuffled nodes plus random one-way arcs."""
    order = list(range(n))
    rng.shuffle(order)
    arcs = {(order[i], order[(i + 1) % n]) for i in range(n)}
    for _ in range(rng.randint(0, 2 * n)):
        u, v = rng.sample(range(n), 2)
        arcs.add((u, v))
    return Graph(n, sorted(arcs))


def random_small_graph(rng: random.Random, max_nodes: int = 8) -> Graph:
    kind = rng.randrange(4)
    if kind == 0:
        w = rng.randint(1, 3)
        h = rng.randint(1, max(1, max_nodes // w))
        return open_grid(w, min(h, max_nodes // w))
    n = rng.randint(2, max_nodes)
    if kind == 1:
        return random_connected(n, rng)
    if kind == 2 and n >= 3:
        return random_biconnected(n, rng)
    return random_strongly_connected(n, rng)


def random_agents(
    g: Graph, n: int, rng: random.Random, goal_prob: float = 1.0, max_eta: int = 5
) -> list[AgentState]:
    starts = rng.sample(range(g.node_count), n)
    ranks = list(range(n))
    rng.shuffle(ranks)
    agents = []
    for i, s in enumerate(starts):
        goal = rng.randrange(g.node_count) if rng.random() < goal_prob else None
        agents.append(
            AgentState(id=i, pos=s, goal=goal, epsilon=Fraction(ranks[i], n), eta=rng.randint(0, max_eta))
        )
    return agents


def conflict_free_moves(g: Graph, positions: list[int]) -> set[tuple[int, ...]]:
    """Every joint move with distinct targets, moves along arcs or stays, and no one-edge swap."""
    options = [(v, *g.neighbors[v]) for v in positions]
    out = set()
    for combo in itertools.product(*options):
        if len(set(combo)) != len(combo):
            continue
        swap = any(
            combo[i] == positions[j] and combo[j] == positions[i]
            for i in range(len(combo))
            for j in range(i + 1, len(combo))
        )
        if not swap:
            out.add(combo)
    return out
