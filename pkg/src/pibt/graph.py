"""Environment graphs, grid-map loading, hop distances and the cycle-condition check."""

from __future__ import annotations

import threading
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _backend

UNREACHABLE = -1

PASSABLE = frozenset(".G")
BLOCKED = frozenset("@TO")


class GraphError(ValueError):
    """Raised for malformed or unusable environments."""


class EmptyMap(GraphError):
    pass


class DisconnectedMap(GraphError):
    """The passable region is not strongly connected.

    ``components`` holds one node list per connected piece (for grids the
    nodes are given as ``(row, col)`` labels).
    """

    def __init__(self, message: str, components: list[list]):
        super().__init__(message)
        self.components = components


class MapParseError(GraphError):
    pass


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    passable: tuple[tuple[bool, ...], ...]

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "GridMap":
        """Build from character rows; ``.``/``G`` are passable, anything else blocked."""
        if not rows:
            raise EmptyMap("map has no rows")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise MapParseError("ragged map rows")
        cells = tuple(tuple(ch in PASSABLE for ch in r) for r in rows)
        return cls(width=width, height=len(rows), passable=cells)

    def to_rows(self) -> list[str]:
        return ["".join("." if c else "@" for c in row) for row in self.passable]

    def is_passable(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width and self.passable[row][col]


class Graph:
    """Simple, strongly connected directed graph over nodes ``0..node_count-1``.

    Undirected inputs are stored as symmetric arc pairs. Neighbor lists are
    sorted by node index, which downstream tie-breaking relies on.
    """

    def __init__(
        self,
        node_count: int,
        arcs: Iterable[tuple[int, int]],
        node_labels: Sequence[tuple[int, int]] | None = None,
        undirected: bool = False,
    ):
        if node_count < 1:
            raise EmptyMap("graph has no nodes")
        self.node_count = node_count
        adj: list[set[int]] = [set() for _ in range(node_count)]
        for u, v in arcs:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise GraphError(f"arc ({u}, {v}) references an unknown node")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if v in adj[u]:
                raise GraphError(f"duplicate arc ({u}, {v})")
            adj[u].add(v)
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in adj)
        rev: list[list[int]] = [[] for _ in range(node_count)]
        for u, nbrs in enumerate(self.neighbors):
            for v in nbrs:
                rev[v].append(u)
        self.predecessors: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in rev)
        self.undirected = undirected or all(
            set(self.neighbors[u]) == set(self.predecessors[u]) for u in range(node_count)
        )
        self.node_labels = tuple(node_labels) if node_labels is not None else None
        if self.node_labels is not None and len(self.node_labels) != node_count:
            raise GraphError("node_labels length does not match node_count")
        self._label_index = (
            {lab: i for i, lab in enumerate(self.node_labels)} if self.node_labels else None
        )
        self.arc_count = sum(len(n) for n in self.neighbors)
        self.max_degree = max(len(n) for n in self.neighbors)

        self.indptr, self.indices = _csr(self.neighbors)
        self.rev_indptr, self.rev_indices = _csr(self.predecessors)
        self._diameter: int | None = None

        self._check_strongly_connected()

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]] = (),
        arcs: Iterable[tuple[int, int]] = (),
        node_labels: Sequence[tuple[int, int]] | None = None,
    ) -> "Graph":
        """Mix undirected ``edges`` (stored both ways) with one-way ``arcs``."""
        edges = list(edges)
        arcs = list(arcs)
        all_arcs = list(arcs)
        for u, v in edges:
            all_arcs.append((u, v))
            all_arcs.append((v, u))
        return cls(node_count, all_arcs, node_labels=node_labels, undirected=not arcs)

    def has_arc(self, u: int, v: int) -> bool:
        nbrs = self.neighbors[u]
        i = bisect_left(nbrs, v)
        return i < len(nbrs) and nbrs[i] == v

    def node_at(self, row: int, col: int) -> int:
        if self._label_index is None:
            raise GraphError("graph has no grid labels")
        try:
            return self._label_index[(row, col)]
        except KeyError:
            raise GraphError(f"cell ({row}, {col}) is not a passable node") from None

    def arcs(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.neighbors) for v in nbrs]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges ``u < v`` (only meaningful for undirected graphs)."""
        return [(u, v) for u, v in self.arcs() if u < v]

    @property
    def diameter(self) -> int:
        if self._diameter is None:
            self._diameter = diameter(self)
        return self._diameter

    def _check_strongly_connected(self) -> None:
        fwd = _reach(self.neighbors, 0)
        back = _reach(self.predecessors, 0)
        if len(fwd) == self.node_count and len(back) == self.node_count:
            return
        comps = strongly_connected_components(self)
        if self.node_labels is not None:
            comps = [[self.node_labels[v] for v in c] for c in comps]
        sizes = ", ".join(str(len(c)) for c in comps[:10])
        raise DisconnectedMap(
            f"graph is not strongly connected: {len(comps)} components (sizes {sizes})", comps
        )

    def __repr__(self) -> str:
        kind = "undirected" if self.undirected else "directed"
        return f"Graph({kind}, nodes={self.node_count}, arcs={self.arc_count})"


def _csr(lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(lists) + 1, dtype=np.int32)
    np.cumsum([len(x) for x in lists], out=indptr[1:])
    indices = np.fromiter((v for x in lists for v in x), dtype=np.int32, count=int(indptr[-1]))
    return indptr, indices


def _reach(adj: Sequence[Sequence[int]], src: int) -> set[int]:
    seen = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def strongly_connected_components(g: Graph) -> list[list[int]]:
    """Kosaraju, iterative. Components are sorted, largest first."""
    n = g.node_count
    order: list[int] = []
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack = [(s, iter(g.neighbors[s]))]
        while stack:
            u, it = stack[-1]
            for v in it:
                if not seen[v]:
                    seen[v] = True
                    stack.append((v, iter(g.neighbors[v])))
                    break
            else:
                stack.pop()
                order.append(u)
    comp = [-1] * n
    comps: list[list[int]] = []
    for s in reversed(order):
        if comp[s] != -1:
            continue
        cid = len(comps)
        comp[s] = cid
        members = [s]
        stack = [s]
        while stack:
            u = stack.pop()
            for v in g.predecessors[u]:
                if comp[v] == -1:
                    comp[v] = cid
                    members.append(v)
                    stack.append(v)
        comps.append(sorted(members))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


# ---------------------------------------------------------------------------
# grids and file formats


def build_grid_graph(grid: GridMap) -> Graph:
    """One node per passable cell (row-major), 4-connected."""
    labels = [
        (r, c) for r in range(grid.height) for c in range(grid.width) if grid.passable[r][c]
    ]
    if not labels:
        raise EmptyMap("map has no passable cells")
    index = {lab: i for i, lab in enumerate(labels)}
    edges = []
    for (r, c), i in index.items():
        for nb in ((r, c + 1), (r + 1, c)):
            j = index.get(nb)
            if j is not None:
                edges.append((i, j))
    return Graph.from_edges(len(labels), edges=edges, node_labels=labels)


def parse_map(text: str) -> GridMap:
    """Parse the benchmark ``type octile`` grid format."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lines = [ln[:-1] if ln.endswith("\r") else ln for ln in lines]
    if len(lines) < 4:
        raise MapParseError("truncated map header")
    header = {}
    for ln in lines[:3]:
        parts = ln.split()
        if len(parts) != 2:
            raise MapParseError(f"bad header line: {ln!r}")
        header[parts[0]] = parts[1]
    if header.get("type") != "octile":
        raise MapParseError("expected 'type octile'")
    try:
        height = int(header["height"])
        width = int(header["width"])
    except (KeyError, ValueError):
        raise MapParseError("missing or non-integer height/width") from None
    if lines[3] != "map":
        raise MapParseError("expected 'map' line")
    rows = lines[4:]
    if len(rows) != height:
        raise MapParseError(f"expected {height} rows, found {len(rows)}")
    for i, row in enumerate(rows):
        if len(row) != width:
            raise MapParseError(f"row {i} has {len(row)} cells, expected {width}")
        bad = set(row) - PASSABLE - BLOCKED
        if bad:
            raise MapParseError(f"row {i} has unknown cell characters {sorted(bad)}")
    return GridMap.from_rows(rows)


def format_map(grid: GridMap) -> str:
    rows = grid.to_rows()
    return f"type octile\nheight {grid.height}\nwidth {grid.width}\nmap\n" + "\n".join(rows) + "\n"


def parse_graph(text: str) -> Graph:
    """Generic format: ``nodes N`` then ``edge u v`` / ``arc u v`` lines."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MapParseError("empty graph file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "nodes":
        raise MapParseError("first line must be 'nodes N'")
    try:
        n = int(head[1])
    except ValueError:
        raise MapParseError("node count must be an integer") from None
    edges, arcs = [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3 or parts[0] not in ("edge", "arc"):
            raise MapParseError(f"bad line: {ln!r}")
        try:
            u, v = int(parts[1]), int(parts[2])
        except ValueError:
            raise MapParseError(f"bad node index in: {ln!r}") from None
        (edges if parts[0] == "edge" else arcs).append((u, v))
    return Graph.from_edges(n, edges=edges, arcs=arcs)


def format_graph(g: Graph) -> str:
    out = [f"nodes {g.node_count}"]
    if g.undirected:
        out += [f"edge {u} {v}" for u, v in g.edges()]
    else:
        out += [f"arc {u} {v}" for u, v in g.arcs()]
    return "\n".join(out) + "\n"


def load_graph(path: str | Path) -> Graph:
    """Load a ``.map`` grid or a generic graph file, sniffing the first line."""
    text = Path(path).read_text()
    if text.lstrip().startswith("type"):
        return build_grid_graph(parse_map(text))
    return parse_graph(text)


# ---------------------------------------------------------------------------
# distances


def bfs_distances(g: Graph, target: int) -> np.ndarray:
    """Hop distance from every node *to* ``target`` (reverse BFS)."""
    out = np.full(g.node_count, UNREACHABLE, dtype=np.int32)
    _backend.bfs_to(g.rev_indptr, g.rev_indices, target, out)
    return out


class DistanceOracle:
    """Cached hop distances to goal nodes.

    Rows of ``matrix`` hold distances to one target each; ``row_of(goal)``
    returns the row index, computing it on first use. With ``all_pairs`` the
    full table is built up front with Floyd-Warshall.
    """

    def __init__(self, g: Graph, all_pairs: bool = False):
        self.graph = g
        self._lock = threading.Lock()
        self._rows: dict[int, int] = {}
        n = g.node_count
        if all_pairs:
            from scipy.sparse import csr_matrix
            from scipy.sparse.csgraph import floyd_warshall

            weights = np.ones(len(g.indices), dtype=np.float64)
            adj = csr_matrix((weights, g.indices, g.indptr), shape=(n, n))
            d = floyd_warshall(adj, directed=True, unweighted=True)
            self.matrix = np.ascontiguousarray(d.T.astype(np.int32))
            self._rows = {v: v for v in range(n)}
            self._size = n
        else:
            self.matrix = np.empty((min(n, 16), n), dtype=np.int32)
            self._size = 0

    def row_of(self, goal: int) -> int:
        row = self._rows.get(goal)
        if row is not None:
            return row
        with self._lock:
            row = self._rows.get(goal)
            if row is not None:
                return row
            if self._size == self.matrix.shape[0]:
                grown = np.empty((self.matrix.shape[0] * 2, self.graph.node_count), dtype=np.int32)
                grown[: self._size] = self.matrix[: self._size]
                self.matrix = grown
            self.matrix[self._size] = bfs_distances(self.graph, goal)
            row = self._size
            self._size += 1
            self._rows[goal] = row
            return row

    def table(self, goal: int) -> np.ndarray:
        row = self.row_of(goal)  # may reallocate self.matrix
        return self.matrix[row]

    def cost(self, u: int, v: int) -> int:
        row = self.row_of(v)
        return int(self.matrix[row, u])

    def warm(self, goals: Iterable[int]) -> None:
        for goal in goals:
            self.row_of(goal)


def shortest_cost(g: Graph, u: int, v: int, oracle: DistanceOracle | None = None) -> int:
    """Minimum number of arcs on a ``u -> v`` path."""
    if oracle is None:
        oracle = _default_oracle(g)
    return oracle.cost(u, v)


_oracles_lock = threading.Lock()


def _default_oracle(g: Graph) -> DistanceOracle:
    with _oracles_lock:
        oracle = getattr(g, "_oracle", None)
        if oracle is None:
            oracle = DistanceOracle(g)
            g._oracle = oracle  # type: ignore[attr-defined]
        return oracle


def diameter(g: Graph) -> int:
    """Largest hop distance over all ordered node pairs."""
    best = 0
    out = np.empty(g.node_count, dtype=np.int32)
    for s in range(g.node_count):
        out.fill(UNREACHABLE)
        _backend.bfs_to(g.indptr, g.indices, s, out)
        best = max(best, int(out.max()))
    return best


# ---------------------------------------------------------------------------
# cycle condition


@dataclass(frozen=True)
class CycleCheck:
    holds: bool
    witness: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_cycle_condition(g: Graph) -> CycleCheck:
    """Does every arc ``(u, v)`` lie on a simple cycle of length >= 3?

    Equivalent test: ``u`` is reachable from ``v`` once the reverse arc
    ``(v, u)`` is removed. For undirected graphs this is "no bridge", found in
    linear time; directed graphs get one BFS per arc.
    """
    if g.node_count == 1:
        return CycleCheck(True)
    if g.undirected:
        bridges = find_bridges(g)
        if bridges:
            return CycleCheck(False, bridges[0])
        return CycleCheck(True)
    for u, v in g.arcs():
        if not _reaches_without_arc(g, v, u):
            return CycleCheck(False, (u, v))
    return CycleCheck(True)


def _reaches_without_arc(g: Graph, src: int, dst: int) -> bool:
    seen = {src}
    queue = deque([src])
    while queue:
        x = queue.popleft()
        for y in g.neighbors[x]:
            if x == src and y == dst:
                continue
            if y == dst:
                return True
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return False


def find_bridges(g: Graph) -> list[tuple[int, int]]:
    """Bridges of an undirected graph as ``(u, v)`` with ``u < v``, via iterative low-link."""
    n = g.node_count
    disc = [-1] * n
    low = [0] * n
    bridges: list[tuple[int, int]] = []
    clock = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = clock
        clock += 1
        stack = [(root, -1, iter(g.neighbors[root]))]
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v == parent:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = clock
                    clock += 1
                    stack.append((v, u, iter(g.neighbors[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if advanced:
                continue
            stack.pop()
            if parent != -1:
                low[parent] = min(low[parent], low[u])
                if low[u] > disc[parent]:
                    bridges.append((min(u, parent), max(u, parent)))
    return sorted(bridges)
