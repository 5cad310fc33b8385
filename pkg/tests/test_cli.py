import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

import pibt
from pibt.cli import main

MAPS = Path(pibt.__file__).parent / "maps"


def write_map(path: Path, rows: list[str]) -> Path:
    path.write_text(f"type octile\nheight {len(rows)}\nwidth {len(rows[0])}\nmap\n" + "\n".join(rows) + "\n")
    return path


def test_check_pass(capsys, tmp_path):
    assert main(["check", "--map", str(write_map(tmp_path / "m.map", ["..", ".."]))]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cycle_condition"] == "PASS"
    assert (out["nodes"], out["edges"], out["max_degree"], out["diameter"]) == (4, 4, 2, 2)


def test_check_fail_with_witness(capsys, tmp_path):
    assert main(["check", "--map", str(write_map(tmp_path / "c.map", ["....."]))]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["cycle_condition"] == "FAIL" and len(out["witness"]) == 2
    assert len(out["witness_cells"]) == 2


def test_check_warehouse(capsys):
    assert main(["check", "--map", str(MAPS / "warehouse.map")]) == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--map", "MISSING.map", "--agents", "2"],
        ["solve", "--map", "{m}"],
        ["solve", "--map", "{m}", "--agents", "2", "--scen", "x.json"],
        ["solve", "--map", "{m}", "--agents", "2", "--freq", "0"],
        ["bench", "--map", "{m}", "--agents", "2", "--repeat", "0"],
        ["solve", "--map", "{m}", "--agents", "99"],
        ["frobnicate"],
        ["check", "--map", "{bad}"],
    ],
)
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    m = write_map(tmp_path / "m.map", ["...", "..."])
    bad = tmp_path / "bad.map"
    bad.write_text("type octile\nheight 2\nwidth 2\nmap\n..\n")
    argv = [a.format(m=m, bad=bad) for a in argv]
    assert main(argv) == 2


def test_identity_instance(tmp_path, capsys):
    m = write_map(tmp_path / "m.map", ["...", "..."])
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"format": "pibt-scenario", "mode": "mapf", "starts": [0, 4], "goals": [0, 4]}))
    assert main(["solve", "--map", str(m), "--scen", str(scen), "--out", str(tmp_path / "o")]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("mapf success=true makespan=0 sum_of_costs=0")
    assert "max_pibt_calls=" in line
    metrics = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert metrics["success"] and metrics["makespan"] == 0


def test_solver_failure_exit_1(tmp_path, capsys):
    m = write_map(tmp_path / "c.map", ["......"])
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"format": "pibt-scenario", "mode": "mapf", "starts": [0, 5], "goals": [5, 0]}))
    out = tmp_path / "o"
    assert main(["solve", "--map", str(m), "--scen", str(scen), "--max-steps", "100", "--out", str(out)]) == 1
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["diagnostics"]["reason"] == "max_steps"


def run_twice(tmp_path, extra):
    outs = []
    for k in (1, 2):
        out = tmp_path / f"run{k}"
        main(["solve", "--map", str(MAPS / "open8.map"), "--out", str(out), *extra])
        outs.append(out)
    return outs


@pytest.mark.parametrize(
    "extra",
    [
        ["--agents", "20", "--seed", "5"],
        ["--mode", "mapd", "--agents", "6", "--tasks", "40", "--freq", "0.5", "--seed", "3"],
    ],
)
def test_byte_identical_outputs(tmp_path, capsys, extra):
    a, b = run_twice(tmp_path, extra)
    for name in ("scenario.json", "trace.jsonl", "trace.csv", "metrics.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_mapd_histogram(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main([
        "solve", "--mode", "mapd", "--map", str(MAPS / "warehouse.map"),
        "--agents", "20", "--tasks", "500", "--freq", "1", "--out", str(out),
    ])
    assert rc == 0
    rows = list(csv.DictReader((out / "service_times.csv").open()))
    assert sum(int(r["count"]) for r in rows) == 500
    assert "mean_service_time=" in capsys.readouterr().out


def test_scenario_file_reuse(tmp_path, capsys):
    sc = tmp_path / "sc.json"
    assert main(["generate", "--map", str(MAPS / "open8.map"), "--agents", "10", "--seed", "4", "--out", str(sc)]) == 0
    first = sc.read_text()
    main(["solve", "--map", str(MAPS / "open8.map"), "--scen", str(sc), "--out", str(tmp_path / "o")])
    assert (tmp_path / "o" / "scenario.json").read_text() == first
    assert main(["solve", "--mode", "mapd", "--map", str(MAPS / "open8.map"), "--scen", str(sc)]) == 2


def read_rows(path):
    return list(csv.DictReader(path.open()))


def test_bench_single_repeat_matches_row(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["bench", "--map", str(MAPS / "open8.map"), "--agents", "4", "--repeat", "1", "--out", str(out)]) == 0
    (row,) = read_rows(out / "instances.csv")
    (agg,) = read_rows(out / "aggregate.csv")
    assert agg["repeat"] == "1"
    assert float(agg["mean_makespan"]) == float(row["makespan"]) == float(agg["median_makespan"])
    assert float(agg["success_rate"]) == 1.0


def test_bench_open_grid_two_agents(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PIBT_THREADS", "4")
    out = tmp_path / "b"
    assert main(["bench", "--map", str(MAPS / "open8.map"), "--agents", "2", "--repeat", "100", "--out", str(out)]) == 0
    rows = read_rows(out / "instances.csv")
    assert [int(r["seed"]) for r in rows] == list(range(100))
    assert float(read_rows(out / "aggregate.csv")[0]["success_rate"]) == 1.0


def test_bench_mixed_batch(tmp_path, capsys):
    m = write_map(tmp_path / "c.map", ["....."])
    out = tmp_path / "b"
    assert main(["bench", "--map", str(m), "--agents", "2", "--repeat", "10", "--max-steps", "60", "--out", str(out)]) == 0
    rows = read_rows(out / "instances.csv")
    (agg,) = read_rows(out / "aggregate.csv")
    wins = sum(r["success"] == "True" for r in rows)
    assert 0 < wins < 10
    assert float(agg["success_rate"]) == wins / 10
    assert all(r["error"] for r in rows if r["success"] != "True")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "pibt", "check", "--map", str(MAPS / "corridor5.map")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1 and '"FAIL"' in proc.stdout
