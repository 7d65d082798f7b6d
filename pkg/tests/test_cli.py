from __future__ import annotations

import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from helpers import example_graph
from sgiq import cli
from sgiq.config import config_from_dict, load_config, parse_config
from sgiq.formulation import Request
from sgiq.netmodel import EdgeKind, dump_graph, load_graph, parse_nodes_and_edges
from sgiq.sim import build_network

TINY = """
[network]
stations = 6
switches = 2
[constellation]
num_satellites = 4
num_planes = 2
phasing = 0
[traffic]
requests = 2
message_size = 1, 2
[simulation]
num_rounds = 1
"""


def write(tmp_path: Path, name: str, text: str) -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def sgiq(*args: str) -> int:
    return cli.main([str(a) for a in args])


def test_minimal_config_gives_one_edge(tmp_path):
    cfg = write(tmp_path, "c.ini", "[network]\nstations = 2\nattachment_degree = 1\nswitches = 0\n")
    assert sgiq("generate", "--config", cfg, "--out-dir", tmp_path / "s") == 0
    _, nodes, edges = parse_nodes_and_edges((tmp_path / "s" / "topology.txt").read_text())
    assert len(nodes) == 2 and len(edges) == 1


def test_generate_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert sgiq("generate", "--seed", 5, "--out-dir", tmp_path / d) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["constellation.txt", "manifest.json", "requests.txt", "snapshot.txt", "topology.txt"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_generate_round_trip(tmp_path):
    out = tmp_path / "s"
    assert sgiq("generate", "--seed", 8, "--scenario", "abundant", "--out-dir", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = config_from_dict(manifest["config"])
    assert cfg.digest() == manifest["config_hash"]
    stored = load_graph((out / "snapshot.txt").read_text())
    rebuilt = cli.rebuild_snapshot(cfg, out, manifest["seed"])
    assert rebuilt.same_as(stored)
    assert len(stored.nodes) == 50 + 40
    net = build_network(cfg, "abundant", 8)
    assert stored.subgraph(EdgeKind.GROUND).edges == net.ground_edges


def _example_files(tmp_path):
    g = write(tmp_path, "g.txt", dump_graph(example_graph()))
    r = write(tmp_path, "r.txt", cli.dump_requests([Request("r", "A", "B", 3)]))
    return g, r


@pytest.mark.parametrize("solver", ["greedy", "linear"])
def test_route_example(tmp_path, solver, capsys):
    g, r = _example_files(tmp_path)
    out = tmp_path / solver
    code = sgiq("route", "--graph", g, "--requests", r, "--solver", solver, "--noise-threshold", 0.5,
                "--out-dir", out, "--export-lp")
    assert code == 0
    sched = json.loads((out / "schedule.json").read_text())
    assert sched["total_scheduled"] == 3
    assert (out / "feasibility.txt").read_text().startswith("feasible=True")
    assert (out / "instance.lp").read_text().startswith("\\ sgiq routing program")
    assert "total_scheduled=3" in capsys.readouterr().out


def test_route_zero_threshold(tmp_path):
    g, r = _example_files(tmp_path)
    for solver in ("greedy", "linear"):
        out = tmp_path / solver
        assert sgiq("route", "--graph", g, "--requests", r, "--solver", solver,
                    "--noise-threshold", 0, "--out-dir", out) == 0
        assert json.loads((out / "schedule.json").read_text())["total_scheduled"] == 0


def test_route_from_generated_scenario(tmp_path):
    sgiq("generate", "--seed", 2, "--out-dir", tmp_path / "s")
    assert sgiq("route", "--scenario-dir", tmp_path / "s", "--out-dir", tmp_path / "r") == 0


def test_simulate_writes_manifest_and_outputs(tmp_path):
    cfg = write(tmp_path, "c.ini", TINY)
    out = tmp_path / "run"
    assert sgiq("simulate", "--config", cfg, "--rounds", 2, "--solver", "greedy", "--out-dir", out) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["config_hash"] == config_from_dict(m["config"]).digest()
    assert m["solver"] == "greedy"
    assert m["config"]["sim"]["num_rounds"] == 2
    assert len((out / "rounds.csv").read_text().splitlines()) == 3


def _experiment(tmp_path, body: str, name="x", *extra) -> tuple[int, Path]:
    cfg = write(tmp_path, f"{name}.ini", TINY + body)
    out = tmp_path / name
    return sgiq("experiment", "--config", cfg, "--out-dir", out, *extra), out


def _run_dirs(out: Path) -> list[Path]:
    return [p for p in out.iterdir() if p.is_dir()]


def test_experiment_single_cell(tmp_path):
    code, out = _experiment(tmp_path, "[experiment]\nscenarios = sufficient\nsolvers = greedy\nseeds = 1\n")
    assert code == 0
    dirs = _run_dirs(out)
    assert len(dirs) == 1
    assert sorted(p.name for p in dirs[0].iterdir()) == ["manifest.json", "rounds.csv", "summary.json"]


def test_experiment_full_grid_count(tmp_path):
    body = "[experiment]\nscenarios = abundant, sufficient, insufficient\nsolvers = linear, greedy\nseeds = 1-20\n"
    code, out = _experiment(tmp_path, body)
    assert code == 0
    assert len(_run_dirs(out)) == 120
    with open(out / "aggregate.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 120
    assert json.loads((out / "failures.json").read_text()) == []


def test_experiment_threshold_grid_summary(tmp_path):
    body = "[experiment]\nsolvers = greedy\nseeds = 1-2\nnoise_thresholds = 0.1, 0.3, 0.6\n"
    code, out = _experiment(tmp_path, body)
    assert code == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["noise_threshold"]) for r in rows] == [0.1, 0.3, 0.6]
    assert all(r["runs"] == "2" for r in rows)


def test_experiment_deterministic_across_workers(tmp_path):
    body = "[experiment]\nsolvers = linear, greedy\nseeds = 1-2\n"
    a = _experiment(tmp_path, body, "a")[1]
    b = _experiment(tmp_path, body, "b", "--workers", "2")[1]
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_experiment_partial_failure(tmp_path, monkeypatch, capsys):
    real = cli.run

    def flaky(cfg, net=None):
        if cfg.sim.seed == 2:
            raise RuntimeError("boom")
        return real(cfg, net)

    monkeypatch.setattr(cli, "run", flaky)
    code, out = _experiment(tmp_path, "[experiment]\nsolvers = greedy\nseeds = 1-3\n")
    assert code == 1
    failures = json.loads((out / "failures.json").read_text())
    assert [f["seed"] for f in failures] == [2]
    assert "boom" in failures[0]["error"]
    # the manifest of the failed cell was still written before its results
    assert (out / failures[0]["cell"] / "manifest.json").exists()
    assert not (out / failures[0]["cell"] / "summary.json").exists()
    assert json.loads(capsys.readouterr().err)[0]["seed"] == 2


def test_print_default_config(tmp_path, capsys):
    assert sgiq("--print-default-config") == 0
    text = capsys.readouterr().out
    assert load_config(write(tmp_path, "d.ini", text)) == parse_config("")


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", "[network]\nstations = lots\n")
    assert sgiq("simulate", "--config", cfg, "--out-dir", tmp_path / "o") == 2
    assert "stations" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sgiq", "--print-default-config"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("[network]")
