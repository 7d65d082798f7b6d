"""Batch command-line front end: scenario generation, routing, simulation and experiment grids."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCENARIOS, SOLVERS, Config, default_config_text, load_config
from .errors import SgiqError
from .formulation import Request, build_ilp, check_solution, to_lp_text
from .netmodel import (
    RoutingGraph,
    dump_constellation,
    dump_graph,
    dump_topology,
    load_constellation,
    load_graph,
    parse_nodes_and_edges,
    snapshot,
)
from .rng import substream
from .schedule import Schedule
from .sim import build_network, generate_requests, network_snapshot, run, solve

log = logging.getLogger("sgiq")

AGGREGATE_COLUMNS = (
    "scenario", "solver", "noise_threshold", "seed", "requested", "executed",
    "failed", "never_scheduled", "throughput", "avg_fidelity", "avg_latency",
)
SUMMARY_COLUMNS = (
    "scenario", "solver", "noise_threshold", "runs", "throughput_mean",
    "throughput_var", "avg_fidelity_mean", "avg_latency_mean",
)


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    seed: int
    solver: str
    scenario: str
    version: str
    outputs: tuple[str, ...]
    config: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# scenario files


def dump_requests(requests: list[Request]) -> str:
    lines = ["# sgiq requests v1"]
    lines += [f"request {r.id} {r.source} {r.destination} {r.message_size}" for r in requests]
    return "\n".join(lines) + "\n"


def load_requests(text: str, source: str = "<text>") -> list[Request]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] != "request" or len(parts) != 5:
            raise SgiqError(f"{source}:{lineno}: expected 'request id source destination size'")
        out.append(Request(parts[1], parts[2], parts[3], int(parts[4])))
    return out


def generate_scenario(cfg: Config, seed: int, out_dir: Path) -> RunManifest:
    """Write the ground topology, constellation, round-0 snapshot and requests for ``seed``."""
    sc = cfg.sim
    net = build_network(cfg, sc.scenario, seed)
    g = network_snapshot(cfg, net, seed, 0, 0.0)
    reqs = generate_requests(
        net.users(), cfg.traffic.requests, cfg.traffic.message_size, substream(seed, "requests"), "r000-"
    )
    files = {
        "topology.txt": dump_topology(net.stations, net.ground_edges),
        "constellation.txt": dump_constellation(net.constellation, net.satellites),
        "snapshot.txt": dump_graph(g),
        "requests.txt": dump_requests(reqs),
    }
    manifest = _manifest(cfg, seed, sc.solver, sc.scenario, files)
    write_atomic(out_dir / "manifest.json", manifest.to_json())
    for name, text in files.items():
        write_atomic(out_dir / name, text)
    return manifest


def rebuild_snapshot(cfg: Config, scenario_dir: Path, seed: int) -> RoutingGraph:
    """Recreate the round-0 snapshot from the topology and constellation dumps alone."""
    _, nodes, edges = parse_nodes_and_edges((scenario_dir / "topology.txt").read_text(), "topology.txt")
    ccfg, sats = load_constellation((scenario_dir / "constellation.txt").read_text(), "constellation.txt")
    return snapshot(
        ccfg,
        nodes,
        sats,
        edges,
        0.0,
        cfg.network.mapping(),
        substream(seed, "snapshot", 0),
        freespace_capacity_range=SCENARIOS[cfg.sim.scenario]["edge"],
        keep_sentinel_edges=cfg.network.keep_sentinel_edges,
    )


def _manifest(cfg: Config, seed: int, solver: str, scenario: str, outputs) -> RunManifest:
    return RunManifest(cfg.digest(), seed, solver, scenario, __version__, tuple(sorted(outputs)), cfg.to_dict())


# ----------------------------------------------------------------------------
# experiment grid


@dataclass(frozen=True)
class Cell:
    scenario: str
    solver: str
    noise_threshold: float
    seed: int

    @property
    def name(self) -> str:
        return f"{self.scenario}-{self.solver}-nth{self.noise_threshold:g}-seed{self.seed}"


def experiment_cells(cfg: Config) -> list[Cell]:
    ex = cfg.experiment
    return [
        Cell(sc, so, nth, seed)
        for sc in ex.scenarios
        for so in ex.solvers
        for nth in ex.noise_thresholds
        for seed in ex.seeds
    ]


def cell_config(cfg: Config, cell: Cell) -> Config:
    sim = replace(
        cfg.sim, scenario=cell.scenario, solver=cell.solver, noise_threshold=cell.noise_threshold, seed=cell.seed
    )
    return replace(cfg, sim=sim)


def run_cell(cfg: Config, cell: Cell, out_dir: str) -> dict:
    """Simulate one cell into ``out_dir/<cell name>`` and return its aggregate row."""
    ccfg = cell_config(cfg, cell)
    run_dir = Path(out_dir) / cell.name
    outputs = ("rounds.csv", "summary.json")
    manifest = _manifest(ccfg, cell.seed, cell.solver, cell.scenario, outputs)
    write_atomic(run_dir / "manifest.json", manifest.to_json())
    report = run(ccfg)
    write_atomic(run_dir / "rounds.csv", report.rounds_csv())
    write_atomic(run_dir / "summary.json", report.summary_json({"config": ccfg.to_dict()}))
    d = report.to_dict()
    return {**asdict(cell), **{k: d[k] for k in AGGREGATE_COLUMNS[4:]}}


def _run_cell_safe(args) -> tuple[Cell, dict | None, str | None]:
    cfg, cell, out_dir = args
    try:
        return cell, run_cell(cfg, cell, out_dir), None
    except Exception as exc:  # a failed cell must not sink the grid
        log.debug("cell %s failed", cell.name, exc_info=True)
        return cell, None, f"{type(exc).__name__}: {exc}"


def summarise(rows: list[dict]) -> list[tuple]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["solver"], r["noise_threshold"]), []).append(r)

    def mean(xs):
        xs = [x for x in xs if x is not None]
        return float(np.mean(xs)) if xs else None

    out = []
    for key, rs in groups.items():
        tp = [r["throughput"] for r in rs]
        out.append(
            (*key, len(rs), mean(tp), float(np.var(tp)),
             mean([r["avg_fidelity"] for r in rs]), mean([r["avg_latency"] for r in rs]))
        )
    return out


def run_experiment(cfg: Config, out_dir: Path, workers: int | None = None) -> list[dict]:
    """Run every grid cell; returns the failure list (empty on full success)."""
    cells = experiment_cells(cfg)
    workers = max(1, workers if workers is not None else cfg.experiment.workers)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_atomic(out_dir / "manifest.json", _manifest(
        cfg, cfg.sim.seed, ",".join(cfg.experiment.solvers), ",".join(cfg.experiment.scenarios),
        ["aggregate.csv", "summary.csv", "failures.json"] + [c.name for c in cells],
    ).to_json())
    jobs = [(cfg, c, str(out_dir)) for c in cells]
    if workers == 1:
        results = [_run_cell_safe(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_safe, jobs))

    rows = [r for _, r, _ in results if r is not None]
    failures = [{"cell": c.name, **asdict(c), "error": err} for c, _, err in results if err is not None]
    write_atomic(out_dir / "aggregate.csv", _csv(AGGREGATE_COLUMNS, [[r[k] for k in AGGREGATE_COLUMNS] for r in rows]))
    write_atomic(out_dir / "summary.csv", _csv(SUMMARY_COLUMNS, summarise(rows)))
    write_atomic(out_dir / "failures.json", json.dumps(failures, indent=2, sort_keys=True) + "\n")
    return failures


# ----------------------------------------------------------------------------
# commands


def _load(args) -> Config:
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    sim = cfg.sim
    over = {}
    for flag, key in (("seed", "seed"), ("solver", "solver"), ("noise_threshold", "noise_threshold"),
                      ("scenario", "scenario"), ("rounds", "num_rounds"), ("greedy_sort_by", "greedy_sort_by")):
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    if over:
        sim = replace(sim, **over)
    net = cfg.network
    if getattr(args, "keep_sentinel_edges", False):
        net = replace(net, keep_sentinel_edges=True)
    return replace(cfg, network=net, sim=sim)


def cmd_generate(args) -> int:
    cfg = _load(args)
    m = generate_scenario(cfg, cfg.sim.seed, Path(args.out_dir))
    print(f"wrote {', '.join(m.outputs)} to {args.out_dir}")
    return 0


def cmd_route(args) -> int:
    cfg = _load(args)
    if args.scenario_dir:
        d = Path(args.scenario_dir)
        graph_path, req_path = d / "snapshot.txt", d / "requests.txt"
    elif args.graph and args.requests:
        graph_path, req_path = Path(args.graph), Path(args.requests)
    else:
        raise SgiqError("route needs --scenario-dir or both --graph and --requests")
    g = load_graph(graph_path.read_text(), str(graph_path))
    reqs = load_requests(req_path.read_text(), str(req_path))
    inst = build_ilp(g, reqs, cfg.sim.noise_threshold)
    sched = solve(cfg.sim, g, reqs) if reqs else Schedule(cfg.sim.solver)
    report = check_solution(inst, sched.aggregate(inst))

    out = Path(args.out_dir)
    write_atomic(out / "manifest.json", _manifest(
        cfg, cfg.sim.seed, cfg.sim.solver, cfg.sim.scenario, ["schedule.json", "feasibility.txt"]
    ).to_json())
    write_atomic(out / "schedule.json", sched.to_json())
    write_atomic(out / "feasibility.txt", report.summary() + "\n")
    if args.export_lp:
        write_atomic(out / "instance.lp", to_lp_text(inst))
    print(f"solver={cfg.sim.solver} total_scheduled={sched.total_scheduled} {report.summary().splitlines()[0]}")
    return 0 if report.feasible else 1


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = Path(args.out_dir)
    write_atomic(out / "manifest.json", _manifest(
        cfg, cfg.sim.seed, cfg.sim.solver, cfg.sim.scenario, ["rounds.csv", "summary.json"]
    ).to_json())
    report = run(cfg)
    write_atomic(out / "rounds.csv", report.rounds_csv())
    write_atomic(out / "summary.json", report.summary_json({"config": cfg.to_dict()}))
    fid = "n/a" if report.avg_fidelity is None else f"{report.avg_fidelity:.4f}"
    print(f"throughput={report.throughput:.4f} avg_fidelity={fid} executed={report.executed}/{report.requested}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _load(args)
    if args.seed is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, seeds=(args.seed,)))
    if args.scenario is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, scenarios=(args.scenario,)))
    if args.solver is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, solvers=(args.solver,)))
    if args.noise_threshold is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, noise_thresholds=(args.noise_threshold,)))
    failures = run_experiment(cfg, Path(args.out_dir), args.workers)
    n = len(experiment_cells(cfg))
    print(f"{n - len(failures)}/{n} cells completed in {args.out_dir}")
    if failures:
        json.dump(failures, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgiq", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--print-default-config", action="store_true", help="print the default config and exit")
    sub = p.add_subparsers(dest="command")

    def common(sp, out_default):
        sp.add_argument("--config", help="INI config file (defaults apply when omitted)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--solver", choices=SOLVERS)
        sp.add_argument("--noise-threshold", type=float, dest="noise_threshold")
        sp.add_argument("--scenario", choices=tuple(SCENARIOS))
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--out-dir", default=out_default)
        sp.add_argument("--keep-sentinel-edges", action="store_true")
        sp.add_argument("--greedy-sort-by", choices=("cost", "noise"))

    g = sub.add_parser("generate", help="write a seeded scenario to disk")
    common(g, "scenario")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("route", help="schedule one snapshot and check feasibility")
    common(r, "route-out")
    r.add_argument("--scenario-dir", help="directory written by 'generate'")
    r.add_argument("--graph", help="routing graph dump")
    r.add_argument("--requests", help="requests file")
    r.add_argument("--export-lp", action="store_true", help="also write the integer program as instance.lp")
    r.set_defaults(func=cmd_route)

    s = sub.add_parser("simulate", help="run one multi-round simulation")
    common(s, "run-out")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run the scenario x solver x threshold x seed grid")
    common(e, "experiment-out")
    e.add_argument("--workers", type=int, help="worker processes (default: from config)")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SGIQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return 0
    if not args.command:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (SgiqError, OSError) as exc:
        print(f"sgiq: error: {exc}", file=sys.stderr)
        return 2
