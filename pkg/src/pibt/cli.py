"""Command-line entry points.

Exit codes: 0 success, 1 solver-level failure (or cycle condition violated
for ``check``), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from . import _backend
from .graph import DistanceOracle, Graph, GraphError, check_cycle_condition, load_graph
from .mapd import StreamExhaustedButIncomplete, TaskStream, run_mapd
from .mapf import InstanceInvalid, MapfInstance, solve_mapf
from .scenario import (
    Scenario,
    ScenarioError,
    TooManyAgents,
    generate_scenario,
    load_endpoints,
    read_scen,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_TIMEOUT = 30.0


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    map: Path
    mode: str = "mapf"
    scen: Path | None = None
    agents: int | None = None
    seed: int = 0
    max_steps: int | None = None
    timeout: float = DEFAULT_TIMEOUT
    out: Path | None = None
    repeat: int = 1
    tasks: int = 500
    freq: str = "1"
    all_pairs: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        cfg = cls(
            subcommand=args.cmd,
            map=Path(args.map),
            mode=getattr(args, "mode", "mapf"),
            scen=Path(args.scen) if getattr(args, "scen", None) else None,
            agents=getattr(args, "agents", None),
            seed=getattr(args, "seed", 0),
            max_steps=getattr(args, "max_steps", None),
            timeout=getattr(args, "timeout_sec", DEFAULT_TIMEOUT),
            out=Path(args.out) if getattr(args, "out", None) else None,
            repeat=getattr(args, "repeat", 1),
            tasks=getattr(args, "tasks", 500),
            freq=getattr(args, "freq", "1"),
            all_pairs=getattr(args, "all_pairs", False),
        )
        if cfg.subcommand in ("solve", "generate"):
            if (cfg.scen is None) == (cfg.agents is None):
                raise UsageError("give exactly one of --scen or --agents")
        if cfg.subcommand == "bench":
            if cfg.agents is None:
                raise UsageError("bench needs --agents")
            if cfg.repeat < 1:
                raise UsageError("--repeat must be >= 1")
        try:
            if Fraction(cfg.freq) <= 0:
                raise ValueError
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"bad --freq {cfg.freq!r}") from None
        return cfg


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pibt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--map", required=True, help=".map grid or generic graph file")
        sp.add_argument("--all-pairs", action="store_true", help="precompute Floyd-Warshall distances")

    def run_opts(sp: argparse.ArgumentParser) -> None:
        common(sp)
        sp.add_argument("--mode", choices=("mapf", "mapd"), default="mapf")
        sp.add_argument("--agents", type=int)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-steps", type=int)
        sp.add_argument("--timeout-sec", type=float, default=DEFAULT_TIMEOUT)
        sp.add_argument("--tasks", type=int, default=500)
        sp.add_argument("--freq", default="1", help="tasks per timestep, e.g. 0.2 or 5")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("check", help="graph stats and cycle-condition verdict")
    common(sp)

    sp = sub.add_parser("solve", help="solve one MAPF or MAPD instance")
    run_opts(sp)
    sp.add_argument("--scen", help="scenario JSON or benchmark .scen file")

    sp = sub.add_parser("bench", help="run seeded instances and aggregate")
    run_opts(sp)
    sp.add_argument("--repeat", type=int, default=1)

    sp = sub.add_parser("generate", help="write a seeded scenario JSON")
    run_opts(sp)
    sp.add_argument("--scen", help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = RunConfig.from_args(args)
        graph = load_graph(cfg.map)
        return {
            "check": cmd_check,
            "solve": cmd_solve,
            "bench": cmd_bench,
            "generate": cmd_generate,
        }[cfg.subcommand](cfg, graph)
    except (UsageError, GraphError, ScenarioError, InstanceInvalid, TooManyAgents, OSError, ValueError) as exc:
        print(f"pibt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


# ---------------------------------------------------------------------------


def cmd_check(cfg: RunConfig, graph: Graph) -> int:
    verdict = check_cycle_condition(graph)
    stats = {
        "nodes": graph.node_count,
        "arcs": graph.arc_count,
        "edges": graph.arc_count // 2 if graph.undirected else None,
        "directed": not graph.undirected,
        "max_degree": graph.max_degree,
        "diameter": graph.diameter,
        "cycle_condition": "PASS" if verdict else "FAIL",
        "witness": list(verdict.witness) if verdict.witness else None,
    }
    if verdict.witness and graph.node_labels:
        stats["witness_cells"] = [list(graph.node_labels[v]) for v in verdict.witness]
    print(json.dumps(stats))
    return EXIT_OK if verdict else EXIT_FAIL


def _scenario(cfg: RunConfig, graph: Graph, seed: int) -> Scenario:
    if cfg.scen is not None:
        text = cfg.scen.read_text()
        if text.lstrip().startswith("{"):
            sc = Scenario.from_json(text)
        else:
            sc = read_scen(text, graph)
        sc.check(graph)
        if sc.mode != cfg.mode:
            raise UsageError(f"scenario is {sc.mode} but --mode is {cfg.mode}")
        return sc
    assert cfg.agents is not None
    endpoints = load_endpoints(cfg.map, graph) if cfg.mode == "mapd" else None
    return generate_scenario(
        graph, cfg.mode, cfg.agents, seed,
        tasks=cfg.tasks, frequency=cfg.freq, endpoints=endpoints, map_ref=cfg.map.name,
    )


def _run(cfg: RunConfig, graph: Graph, sc: Scenario, dist: DistanceOracle):
    """Returns (success, result object, metrics dict, runtime)."""
    if sc.mode == "mapf":
        assert sc.goals is not None
        inst = MapfInstance(graph, list(sc.starts), list(sc.goals), cfg.max_steps)
        res = solve_mapf(inst, dist=dist, timeout=cfg.timeout)
        return res.success, res, res.metrics(), res.runtime
    stream = TaskStream.from_specs(sc.tasks or [], Fraction(sc.frequency) if sc.frequency else None)
    try:
        res = run_mapd(graph, sc.starts, stream, cfg.max_steps, dist=dist, timeout=cfg.timeout)
    except StreamExhaustedButIncomplete as exc:
        res = exc.result
    return res.success, res, res.metrics(), res.runtime


def _summary(metrics: dict[str, Any], runtime: float) -> str:
    mc = metrics["max_counters"]
    if metrics["mode"] == "mapf":
        quality = f"sum_of_costs={metrics['sum_of_costs']}"
    else:
        quality = f"mean_service_time={metrics['service_time_mean']}"
    return (
        f"{metrics['mode']} success={str(metrics['success']).lower()} makespan={metrics['makespan']} "
        f"{quality} runtime={runtime:.4f}s max_pibt_calls={mc['pibt_calls']} "
        f"max_backtracks={mc['backtracks']} max_node_evaluations={mc['node_evaluations']} "
        f"backend={_backend.name()}"
    )


def cmd_solve(cfg: RunConfig, graph: Graph) -> int:
    sc = _scenario(cfg, graph, cfg.seed)
    dist = DistanceOracle(graph, all_pairs=cfg.all_pairs)
    ok, res, metrics, runtime = _run(cfg, graph, sc, dist)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "scenario.json").write_text(sc.to_json())
        (cfg.out / "trace.jsonl").write_text(res.trace.to_jsonl(graph))
        (cfg.out / "trace.csv").write_text(res.trace.to_csv(graph))
        (cfg.out / "metrics.json").write_text(json.dumps(metrics, indent=1) + "\n")
        (cfg.out / "timing.json").write_text(json.dumps({"runtime_sec": runtime}) + "\n")
        if sc.mode == "mapd":
            (cfg.out / "service_times.csv").write_text(_histogram_csv(res.service_times))
    print(_summary(metrics, runtime))
    return EXIT_OK if ok else EXIT_FAIL


def _histogram_csv(values: list[int]) -> str:
    counts = Counter(values)
    lines = ["service_time,count"] + [f"{k},{counts[k]}" for k in sorted(counts)]
    return "\n".join(lines) + "\n"


def cmd_generate(cfg: RunConfig, graph: Graph) -> int:
    sc = _scenario(cfg, graph, cfg.seed)
    text = sc.to_json()
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        cfg.out.write_text(text)
    return EXIT_OK


BENCH_FIELDS = [
    "seed", "success", "makespan", "sum_of_costs", "service_time_mean", "steps",
    "runtime_sec", "max_pibt_calls", "max_backtracks", "max_node_evaluations", "error",
]
AGG_FIELDS = [
    "repeat", "successes", "success_rate", "mean_makespan", "median_makespan",
    "mean_service_time", "mean_runtime_sec",
]


def _bench_row(cfg: RunConfig, graph: Graph, dist: DistanceOracle, seed: int) -> dict[str, Any]:
    row: dict[str, Any] = {k: "" for k in BENCH_FIELDS}
    row["seed"] = seed
    try:
        sc = _scenario(cfg, graph, seed)
        ok, _, m, runtime = _run(cfg, graph, sc, dist)
    except Exception as exc:  # noqa: BLE001 -- recorded per row
        row.update(success=False, error=f"{type(exc).__name__}: {exc}")
        return row
    mc = m["max_counters"]
    row.update(
        success=ok,
        makespan=m["makespan"],
        sum_of_costs=m.get("sum_of_costs", ""),
        service_time_mean=m.get("service_time_mean", "") or "",
        steps=m["steps"],
        runtime_sec=round(runtime, 6),
        max_pibt_calls=mc["pibt_calls"],
        max_backtracks=mc["backtracks"],
        max_node_evaluations=mc["node_evaluations"],
    )
    if not ok:
        row["error"] = "timeout or step cutoff"
    return row


def aggregate(rows: list[dict[str, Any]]) -> dict[str, Any]:
    ok = [r for r in rows if r["success"] is True]
    spans = [r["makespan"] for r in ok]
    lam = [r["service_time_mean"] for r in ok if r["service_time_mean"] != ""]
    times = [r["runtime_sec"] for r in rows if r["runtime_sec"] != ""]
    return {
        "repeat": len(rows),
        "successes": len(ok),
        "success_rate": len(ok) / len(rows),
        "mean_makespan": statistics.fmean(spans) if spans else "",
        "median_makespan": statistics.median(spans) if spans else "",
        "mean_service_time": statistics.fmean(lam) if lam else "",
        "mean_runtime_sec": statistics.fmean(times) if times else "",
    }


def cmd_bench(cfg: RunConfig, graph: Graph) -> int:
    dist = DistanceOracle(graph, all_pairs=cfg.all_pairs)
    seeds = [cfg.seed + k for k in range(cfg.repeat)]
    threads = max(1, int(os.environ.get("PIBT_THREADS", "1") or 1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda s: _bench_row(cfg, graph, dist, s), seeds))
    else:
        rows = [_bench_row(cfg, graph, dist, s) for s in seeds]
    agg = aggregate(rows)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        _write_csv(cfg.out / "instances.csv", BENCH_FIELDS, rows)
        _write_csv(cfg.out / "aggregate.csv", AGG_FIELDS, [agg])
    print(
        f"{cfg.mode} repeat={agg['repeat']} success_rate={agg['success_rate']:.3f} "
        f"mean_makespan={agg['mean_makespan']} mean_runtime={agg['mean_runtime_sec']}"
    )
    return EXIT_OK


def _write_csv(path: Path, fields: list[str], rows: list[dict[str, Any]]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
