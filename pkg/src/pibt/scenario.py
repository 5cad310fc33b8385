"""Scenarios, traces, seeded generation and an independent trace validator.

Nothing here imports the planner: ``validate_trace`` re-checks movement
rules from the graph alone.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .graph import Graph, GridMap, MapParseError, build_grid_graph
from .rng import SplitMix64

TRACE_FORMAT = "pibt-trace"
SCENARIO_FORMAT = "pibt-scenario"


class TooManyAgents(ValueError):
    pass


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# traces


@dataclass
class Trace:
    """Joint positions per timestep, with events and the counters of the step
    planned at that timestep (``None`` for the last record)."""

    positions: list[list[int]] = field(default_factory=list)
    events: list[list[dict[str, Any]]] = field(default_factory=list)
    counters: list[dict[str, int] | None] = field(default_factory=list)
    goals: list[int] | None = None

    def append(self, positions: Sequence[int], events: list[dict[str, Any]] | None = None) -> None:
        self.positions.append(list(positions))
        self.events.append(events or [])
        self.counters.append(None)

    @property
    def n_agents(self) -> int:
        return len(self.positions[0]) if self.positions else 0

    @property
    def final_step(self) -> int:
        return len(self.positions) - 1

    def to_jsonl(self, graph: Graph | None = None) -> str:
        labels = graph.node_labels if graph is not None else None
        header: dict[str, Any] = {"format": TRACE_FORMAT, "version": 1, "agents": self.n_agents}
        if self.goals is not None:
            header["goals"] = self.goals
        lines = [json.dumps(header, separators=(",", ":"))]
        for t, pos in enumerate(self.positions):
            rec: dict[str, Any] = {"t": t, "pos": pos}
            if labels is not None:
                rec["rc"] = [list(labels[v]) for v in pos]
            rec["events"] = self.events[t]
            rec["counters"] = self.counters[t]
            lines.append(json.dumps(rec, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ScenarioError("empty trace")
        header = json.loads(lines[0])
        if header.get("format") != TRACE_FORMAT:
            raise ScenarioError("not a pibt trace")
        trace = cls(goals=header.get("goals"))
        for t, ln in enumerate(lines[1:]):
            rec = json.loads(ln)
            if rec["t"] != t:
                raise ScenarioError(f"trace record {t} out of order")
            trace.positions.append(rec["pos"])
            trace.events.append(rec["events"])
            trace.counters.append(rec["counters"])
        return trace

    def to_csv(self, graph: Graph | None = None) -> str:
        """Long-format ``t,agent,node,row,col`` rows for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        labels = graph.node_labels if graph is not None else None
        w.writerow(["t", "agent", "node", "row", "col"])
        for t, pos in enumerate(self.positions):
            for i, v in enumerate(pos):
                r, c = labels[v] if labels is not None else ("", "")
                w.writerow([t, i, v, r, c])
        return buf.getvalue()


@dataclass(frozen=True)
class Violation:
    kind: str
    step: int
    agents: tuple[int, ...]
    detail: str = ""


def validate_trace(trace: Trace, graph: Graph, scenario: "Scenario | None" = None) -> list[Violation]:
    """Every movement-rule violation in ``trace``; an empty list means valid.

    Checked per step: positions are valid nodes and pairwise distinct; each
    agent stays or follows an arc; no two agents exchange nodes across one
    edge; an agent enters a node held at t only if its holder leaves.
    """
    out: list[Violation] = []
    try:
        positions = [list(map(int, p)) for p in trace.positions]
    except (TypeError, ValueError):
        return [Violation("MalformedTrace", 0, (), "positions are not integer lists")]
    if not positions:
        return [Violation("MalformedTrace", 0, (), "trace has no timesteps")]
    n = len(positions[0])
    n_nodes = graph.node_count

    if scenario is not None and positions[0] != list(scenario.starts):
        out.append(Violation("StartMismatch", 0, (), "first record differs from scenario starts"))

    for t, pos in enumerate(positions):
        if len(pos) != n:
            out.append(Violation("MalformedTrace", t, (), f"expected {n} agents, got {len(pos)}"))
            return out
        bad = tuple(i for i, v in enumerate(pos) if not 0 <= v < n_nodes)
        if bad:
            out.append(Violation("UnknownNode", t, bad))
            return out
        holder: dict[int, int] = {}
        for i, v in enumerate(pos):
            if v in holder:
                out.append(Violation("VertexCollision", t, (holder[v], i), f"node {v}"))
            else:
                holder[v] = i

    for t in range(len(positions) - 1):
        cur, nxt = positions[t], positions[t + 1]
        at = {v: i for i, v in enumerate(cur)}
        for i in range(n):
            u, v = cur[i], nxt[i]
            if u != v and v not in graph.neighbors[u]:
                out.append(Violation("AdjacencyViolation", t, (i,), f"{u} -> {v}"))
            if u == v:
                continue
            j = at.get(v)
            if j is None or j == i:
                continue
            if nxt[j] == cur[j]:
                out.append(Violation("OccupiedEntry", t, (i, j), f"node {v} held by a stayer"))
            elif nxt[j] == u:
                if i < j:
                    out.append(Violation("SwapViolation", t, (i, j), f"{u} <-> {v}"))
    return out


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class TaskSpec:
    pickup: int
    delivery: int
    issued_at: int

    def to_json(self) -> dict[str, int]:
        return {"pickup": self.pickup, "delivery": self.delivery, "issued_at": self.issued_at}


@dataclass
class Scenario:
    mode: str
    starts: list[int]
    goals: list[int] | None = None
    tasks: list[TaskSpec] | None = None
    map: str | None = None
    seed: int | None = None
    frequency: str | None = None

    @property
    def n_agents(self) -> int:
        return len(self.starts)

    def check(self, graph: Graph) -> None:
        n = graph.node_count
        if len(set(self.starts)) != len(self.starts):
            raise ScenarioError("starts are not pairwise distinct")
        nodes = list(self.starts) + list(self.goals or [])
        for t in self.tasks or []:
            nodes += [t.pickup, t.delivery]
        for v in nodes:
            if not 0 <= v < n:
                raise ScenarioError(f"node {v} is not in the graph")
        if self.mode == "mapf" and (self.goals is None or len(self.goals) != len(self.starts)):
            raise ScenarioError("MAPF scenario needs one goal per agent")

    def to_json(self) -> str:
        doc: dict[str, Any] = {
            "format": SCENARIO_FORMAT,
            "version": 1,
            "mode": self.mode,
            "map": self.map,
            "seed": self.seed,
            "agents": self.n_agents,
            "starts": self.starts,
        }
        if self.goals is not None:
            doc["goals"] = self.goals
        if self.tasks is not None:
            doc["frequency"] = self.frequency
            doc["tasks"] = [t.to_json() for t in self.tasks]
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        if doc.get("format") != SCENARIO_FORMAT:
            raise ScenarioError("not a pibt scenario")
        mode = doc.get("mode")
        if mode not in ("mapf", "mapd"):
            raise ScenarioError(f"unknown mode {mode!r}")
        tasks = doc.get("tasks")
        return cls(
            mode=mode,
            starts=list(doc["starts"]),
            goals=doc.get("goals"),
            tasks=[TaskSpec(**t) for t in tasks] if tasks is not None else None,
            map=doc.get("map"),
            seed=doc.get("seed"),
            frequency=doc.get("frequency"),
        )


def issue_times(total: int, frequency: Fraction | float | str) -> list[int]:
    """Task k is issued at ``floor(k / frequency)``: 0.2 gives 0, 5, 10, ...; 2 gives 0, 0, 1, 1, ..."""
    f = Fraction(str(frequency)) if not isinstance(frequency, Fraction) else frequency
    if f <= 0:
        raise ValueError("frequency must be positive")
    return [int(Fraction(k) / f) for k in range(total)]


def generate_scenario(
    graph: Graph,
    mode: str,
    n_agents: int,
    seed: int,
    *,
    tasks: int = 500,
    frequency: Fraction | float | str = 1,
    endpoints: Sequence[int] | None = None,
    map_ref: str | None = None,
) -> Scenario:
    """Random starts (distinct); distinct random goals for MAPF, or a task
    stream with pickup/delivery drawn from ``endpoints`` for MAPD."""
    if n_agents > graph.node_count:
        raise TooManyAgents(f"{n_agents} agents but only {graph.node_count} nodes")
    if mode not in ("mapf", "mapd"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = SplitMix64(seed)
    nodes = list(range(graph.node_count))
    starts = rng.sample(nodes, n_agents)
    if mode == "mapf":
        goals = rng.sample(nodes, n_agents)
        return Scenario("mapf", starts, goals=goals, map=map_ref, seed=seed)

    pool = sorted(set(endpoints)) if endpoints is not None else nodes
    if len(pool) < 2:
        raise ScenarioError("need at least two task endpoints")
    specs = []
    for at in issue_times(tasks, frequency):
        pickup = rng.choice(pool)
        delivery = rng.choice(pool)
        while delivery == pickup:
            delivery = rng.choice(pool)
        specs.append(TaskSpec(pickup, delivery, at))
    return Scenario(
        "mapd", starts, tasks=specs, map=map_ref, seed=seed, frequency=str(Fraction(str(frequency)))
    )


def read_scen(text: str, graph: Graph, n_agents: int | None = None) -> Scenario:
    """Import a tab-separated benchmark ``.scen`` file (x = column, y = row)."""
    starts, goals = [], []
    for ln in text.splitlines():
        if not ln.strip() or ln.startswith("version"):
            continue
        parts = ln.split("\t")
        if len(parts) < 8:
            raise ScenarioError(f"bad .scen line: {ln!r}")
        sx, sy, gx, gy = (int(p) for p in parts[4:8])
        starts.append(graph.node_at(sy, sx))
        goals.append(graph.node_at(gy, gx))
        if n_agents is not None and len(starts) == n_agents:
            break
    if n_agents is not None and len(starts) < n_agents:
        raise TooManyAgents(f".scen file has only {len(starts)} entries")
    return Scenario("mapf", starts, goals=goals)


def load_endpoints(map_path: str | Path, graph: Graph) -> list[int] | None:
    """Task endpoints from a ``<map>.endpoints.json`` sidecar, if present."""
    side = Path(str(map_path) + ".endpoints.json")
    if not side.exists():
        return None
    doc = json.loads(side.read_text())
    try:
        return sorted(graph.node_at(r, c) for r, c in doc["endpoints"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MapParseError(f"bad endpoints sidecar {side}: {exc}") from None


def warehouse_map(
    shelf_rows: int = 9, shelf_blocks: int = 3, shelf_len: int = 9, side: int = 3
) -> tuple[GridMap, list[tuple[int, int]]]:
    """A warehouse-style grid: rows of shelf blocks separated by one-cell aisles,
    open bays on both sides. Task endpoints are aisle cells next to a shelf.

    Defaults give a 21 x 35 map.
    """
    height = 2 * shelf_rows + 3
    width = 2 * side + shelf_blocks * shelf_len + (shelf_blocks - 1)
    cells = [[True] * width for _ in range(height)]
    for k in range(shelf_rows):
        r = 2 + 2 * k
        for b in range(shelf_blocks):
            c0 = side + b * (shelf_len + 1)
            for c in range(c0, c0 + shelf_len):
                cells[r][c] = False
    endpoints = []
    for r in range(height):
        for c in range(width):
            if not cells[r][c]:
                continue
            if any(0 <= r + dr < height and not cells[r + dr][c] for dr in (-1, 1)):
                endpoints.append((r, c))
    grid = GridMap(width, height, tuple(tuple(row) for row in cells))
    return grid, endpoints


def warehouse_graph() -> tuple[Graph, list[int]]:
    grid, eps = warehouse_map()
    g = build_grid_graph(grid)
    return g, [g.node_at(r, c) for r, c in eps]
