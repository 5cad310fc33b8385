"""Compare the compiled and pure-Python kernels: one PIBT step and one BFS row.

    python benchmarks/bench_kernels.py [--sizes 16 32 64] [--density 0.3] [--reps 50]
"""

from __future__ import annotations

import argparse
import random
import statistics
import time

import numpy as np

from pibt import _backend, _pykernels
from pibt.engine import make_agents, step, update_priorities
from pibt.graph import DistanceOracle, GridMap, build_grid_graph
from pibt.scenario import generate_scenario


def timed(fn, reps: int) -> float:
    """Median seconds per call."""
    samples = []
    for _ in range(reps):
        tic = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - tic)
    return statistics.median(samples)


def bench_step(size: int, density: float, reps: int) -> dict[str, float]:
    g = build_grid_graph(GridMap.from_rows(["." * size] * size))
    n = max(1, int(density * g.node_count))
    sc = generate_scenario(g, "mapf", n, seed=size)
    agents = make_agents(sc.starts, sc.goals)
    dist = DistanceOracle(g)
    dist.warm(set(sc.goals))
    # a few real steps so eta values and positions are non-trivial
    for t in range(5):
        update_priorities(agents, t)
        nxt, _ = step(agents, g, dist)
        for a, v in zip(agents, nxt):
            a.pos = v
    update_priorities(agents, 5)
    out = {"agents": n, "python": timed(lambda: step(agents, g, dist, backend="python"), reps)}
    if _backend.NATIVE:
        out["native"] = timed(lambda: step(agents, g, dist, backend="native"), reps)
    return out


def bench_bfs(size: int, reps: int) -> dict[str, float]:
    g = build_grid_graph(GridMap.from_rows(["." * size] * size))
    buf = np.empty(g.node_count, dtype=np.int32)
    src = random.Random(size).randrange(g.node_count)

    def run(kernel):
        buf.fill(-1)
        kernel(g.rev_indptr, g.rev_indices, src, buf)

    out = {"python": timed(lambda: run(_pykernels.bfs_to), reps)}
    if _backend.NATIVE:
        out["native"] = timed(lambda: run(_backend.bfs_to), reps)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--density", type=float, default=0.3)
    ap.add_argument("--reps", type=int, default=30)
    args = ap.parse_args()

    print(f"backend available: {_backend.name()}")
    print(f"{'kernel':<6} {'grid':>7} {'agents':>7} {'python ms':>10} {'native ms':>10} {'speedup':>8}")
    for size in args.sizes:
        for kernel, res in (("step", bench_step(size, args.density, args.reps)), ("bfs", bench_bfs(size, args.reps))):
            py = res["python"] * 1e3
            nat = res.get("native")
            nat_s = f"{nat * 1e3:10.3f}" if nat else f"{'n/a':>10}"
            speed = f"{res['python'] / nat:7.1f}x" if nat else f"{'':>8}"
            agents = res.get("agents", "")
            print(f"{kernel:<6} {size:>3}x{size:<3} {agents!s:>7} {py:10.3f} {nat_s} {speed}")


if __name__ == "__main__":
    main()
