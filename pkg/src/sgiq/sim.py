"""Round-based stochastic execution of routing schedules and metric aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from . import greedy, linear
from .config import SCENARIOS, Config, SimConfig
from .formulation import Request
from .netmodel import (
    ConstellationConfig,
    Edge,
    GroundStation,
    RoutingGraph,
    Satellite,
    build_constellation,
    generate_ground_topology,
    snapshot,
)
from .physics import purified_fidelity
from .rng import substream
from .schedule import Schedule, assert_fits

LATENCY_DEFINITION = "execution round - arrival round + 1, averaged over executed messages"
ROUND_COLUMNS = ("round", "active_requests", "scheduled", "executed", "failed", "avg_fidelity", "residual")


@dataclass(frozen=True)
class Network:
    """Everything about a trial's network that does not change between rounds."""

    constellation: ConstellationConfig
    stations: tuple[GroundStation, ...]
    ground_edges: tuple[Edge, ...]
    satellites: tuple[Satellite, ...]
    freespace_capacity: tuple[int, int]

    def users(self) -> list[str]:
        return [s.id for s in self.stations if not s.is_repeater]


def build_network(cfg: Config, scenario: str, seed: int) -> Network:
    """Seeded topology with the scenario's capacity ranges and swap-derived noise amendments."""
    net = cfg.network
    caps = SCENARIOS[scenario]
    sigma = repeater_noise_amendment(cfg.sim.swap_success_prob)
    topo = generate_ground_topology(
        net.stations,
        net.attachment_degree,
        net.switches,
        seed,
        fidelity_range=net.ground_fidelity,
        edge_capacity_range=caps["edge"],
        memory_capacity_range=caps["memory"],
        switch_noise_amendment=sigma,
        region=net.region,
    )
    c = net.constellation
    rng = substream(seed, "capacities", "satellites")
    mem = rng.integers(caps["memory"][0], caps["memory"][1] + 1, size=c.num_satellites)
    sats = build_constellation(c, mem, sigma)
    return Network(c, topo.stations, topo.edges, tuple(sats), caps["edge"])


def repeater_noise_amendment(swap_success_prob: float) -> float:
    """Planning noise per swap: ``ln(1/p)``, the log-loss of one swap attempt."""
    if swap_success_prob <= 0.0:
        return math.inf
    return -math.log(swap_success_prob)


def network_snapshot(cfg: Config, net: Network, seed: int, round_index: int, t: float) -> RoutingGraph:
    return snapshot(
        net.constellation,
        net.stations,
        net.satellites,
        net.ground_edges,
        t,
        cfg.network.mapping(),
        substream(seed, "snapshot", round_index),
        freespace_capacity_range=net.freespace_capacity,
        keep_sentinel_edges=cfg.network.keep_sentinel_edges,
    )


def generate_requests(
    users: Sequence[str], count: int, size_range: tuple[int, int], rng: np.random.Generator, prefix: str
) -> list[Request]:
    users = sorted(users)
    if count and len(users) < 2:
        raise ValueError("need at least two users to generate requests")
    out = []
    for i in range(count):
        a, b = rng.choice(len(users), size=2, replace=False)
        m = int(rng.integers(size_range[0], size_range[1] + 1))
        out.append(Request(f"{prefix}{i:03d}", users[int(a)], users[int(b)], m))
    return out


# ----------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class MessageOutcome:
    request_id: str
    success: bool
    fidelity: float
    repeaters: int


@dataclass
class RoundOutcome:
    messages: list[MessageOutcome]

    @property
    def executed(self) -> int:
        return sum(m.success for m in self.messages)

    @property
    def failed(self) -> int:
        return len(self.messages) - self.executed


def route_fidelity(g: RoutingGraph, nodes: Sequence[str], purification: Sequence[int]) -> float:
    """Product of per-hop fidelities after each hop's scheduled purifications."""
    f = 1.0
    for (u, v), extra in zip(zip(nodes, nodes[1:]), purification):
        f *= purified_fidelity(g.edge_between(u, v).fidelity, extra)
    return f


def execute_round(
    g: RoutingGraph, schedule: Schedule, rng: np.random.Generator, swap_success_prob: float = 0.95
) -> RoundOutcome:
    """Draw one Bernoulli swap per interior repeater for every scheduled message.

    Raises:
        InfeasibleSchedule: if the schedule exceeds the graph's capacities.
    """
    assert_fits(g, schedule.routes)
    out = []
    for route in schedule.routes:
        fid = route_fidelity(g, route.nodes, route.purification)
        r = len(route.interior)
        for _ in range(route.multiplicity):
            ok = bool(np.all(rng.random(r) < swap_success_prob)) if r else True
            out.append(MessageOutcome(route.request_id, ok, fid, r))
    return RoundOutcome(out)


# ----------------------------------------------------------------------------
# metrics


@dataclass
class RoundStats:
    round: int
    active_requests: int
    scheduled: int
    executed: int
    failed: int
    avg_fidelity: float | None
    residual: int


@dataclass
class MetricsReport:
    requested: int
    executed: int
    failed: int
    never_scheduled: int
    throughput: float
    avg_fidelity: float | None
    avg_latency: float | None
    rounds: list[RoundStats] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "executed": self.executed,
            "failed": self.failed,
            "never_scheduled": self.never_scheduled,
            "throughput": self.throughput,
            "avg_fidelity": self.avg_fidelity,
            "avg_latency": self.avg_latency,
            "rounds": [vars(r) for r in self.rounds],
            "metadata": self.metadata,
        }

    def rounds_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROUND_COLUMNS)
        for r in self.rounds:
            fid = "" if r.avg_fidelity is None else repr(r.avg_fidelity)
            w.writerow([r.round, r.active_requests, r.scheduled, r.executed, r.failed, fid, r.residual])
        return buf.getvalue()

    def summary_json(self, extra: dict | None = None) -> str:
        d = self.to_dict()
        if extra:
            d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


@dataclass
class _Pending:
    request: Request
    arrival: int
    fresh: int
    retry: int = 0

    @property
    def remaining(self) -> int:
        return self.fresh + self.retry


def solve(cfg: SimConfig, g: RoutingGraph, requests: Sequence[Request]) -> Schedule:
    if cfg.solver == "linear":
        return linear.linear_route(g, requests, cfg.noise_threshold, pivot_rule=cfg.pivot_rule)
    return greedy.greedy_route(g, requests, cfg.noise_threshold, sort_by=cfg.greedy_sort_by)


def run(cfg: Config, net: Network | None = None) -> MetricsReport:
    """Simulate ``cfg.sim.num_rounds`` rounds of snapshot, solve and execute.

    Unexecuted messages stay in the pool with their original arrival round.
    Deterministic for a fixed config: every random draw comes from a named
    sub-stream of ``cfg.sim.seed``.
    """
    sc = cfg.sim
    seed = sc.seed
    if net is None:
        net = build_network(cfg, sc.scenario, seed)
    dt = sc.round_dt_s if sc.round_dt_s is not None else net.constellation.period_s / 32
    req_rng = substream(seed, "requests")
    sim_rng = substream(seed, "simulation")
    users = net.users()

    pending: list[_Pending] = []
    requested = executed = 0
    fidelities: list[float] = []
    latencies: list[int] = []
    stats: list[RoundStats] = []
    for rnd in range(sc.num_rounds):
        count = cfg.traffic.requests if rnd == 0 else cfg.traffic.arrivals_per_round
        for req in generate_requests(users, count, cfg.traffic.message_size, req_rng, f"r{rnd:03d}-"):
            pending.append(_Pending(req, rnd, req.message_size))
            requested += req.message_size

        active = [p for p in pending if p.remaining > 0]
        g = network_snapshot(cfg, net, seed, rnd, rnd * dt)
        batch = [replace(p.request, message_size=p.remaining) for p in active]
        sched = solve(sc, g, batch) if batch else Schedule(sc.solver)
        outcome = execute_round(g, sched, sim_rng, sc.swap_success_prob)

        by_id = {p.request.id: p for p in active}
        for rid in {m.request_id for m in outcome.messages}:
            p = by_id[rid]
            msgs = [m for m in outcome.messages if m.request_id == rid]
            taken_retry = min(len(msgs), p.retry)
            taken_fresh = len(msgs) - taken_retry
            ok = sum(m.success for m in msgs)
            p.fresh -= taken_fresh
            p.retry = p.retry - taken_retry + (len(msgs) - ok)
        round_fids = [m.fidelity for m in outcome.messages if m.success]
        for m in outcome.messages:
            if m.success:
                fidelities.append(m.fidelity)
                latencies.append(rnd - by_id[m.request_id].arrival + 1)
        executed += outcome.executed
        stats.append(
            RoundStats(
                rnd,
                len(active),
                len(outcome.messages),
                outcome.executed,
                outcome.failed,
                float(np.mean(round_fids)) if round_fids else None,
                sum(p.remaining for p in pending),
            )
        )

    failed = sum(p.retry for p in pending)
    never = sum(p.fresh for p in pending)
    return MetricsReport(
        requested=requested,
        executed=executed,
        failed=failed,
        never_scheduled=never,
        throughput=executed / requested if requested else 1.0,
        avg_fidelity=float(np.mean(fidelities)) if fidelities else None,
        avg_latency=float(np.mean(latencies)) if latencies else None,
        rounds=stats,
        metadata={
            "latency_definition": LATENCY_DEFINITION,
            "latency_unit": "rounds",
            "fidelity_mapping": cfg.network.fidelity_mapping,
            "solver": sc.solver,
            "scenario": sc.scenario,
            "seed": seed,
            "noise_threshold": sc.noise_threshold,
            "swap_success_prob": sc.swap_success_prob,
            "round_dt_s": dt,
        },
    )


# ----------------------------------------------------------------------------
# comparisons


@dataclass
class Comparison:
    labels: tuple[str, str]
    reports: tuple[list[MetricsReport], list[MetricsReport]]
    seeds: tuple[int, ...]

    def throughput_series(self) -> dict[str, list[float]]:
        return {lab: [r.throughput for r in reps] for lab, reps in zip(self.labels, self.reports)}

    def table(self) -> dict[str, dict[str, float | None]]:
        out = {}
        for lab, reps in zip(self.labels, self.reports):
            out[lab] = {
                "throughput": _mean([r.throughput for r in reps]),
                "throughput_var": float(np.var([r.throughput for r in reps])) if reps else None,
                "avg_fidelity": _mean([r.avg_fidelity for r in reps]),
                "avg_latency": _mean([r.avg_latency for r in reps]),
            }
        return out


def _mean(xs) -> float | None:
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def compare_solvers(cfg_a: Config, cfg_b: Config, seeds: Sequence[int]) -> Comparison:
    """Run two configs (normally differing only in solver) on the same seeded scenarios."""
    reps_a, reps_b = [], []
    for s in seeds:
        a = replace(cfg_a, sim=replace(cfg_a.sim, seed=s))
        b = replace(cfg_b, sim=replace(cfg_b.sim, seed=s))
        reps_a.append(run(a))
        reps_b.append(run(b))
    return Comparison((cfg_a.sim.solver, cfg_b.sim.solver), (reps_a, reps_b), tuple(seeds))


def threshold_sweep(cfg: Config, grid: Sequence[float], seeds: Sequence[int]) -> list[dict]:
    """Mean throughput and fidelity per noise threshold (one row per grid point)."""
    rows = []
    for nth in grid:
        reps = []
        for s in seeds:
            c = replace(cfg, sim=replace(cfg.sim, noise_threshold=nth, seed=s))
            reps.append(run(c))
        rows.append(
            {
                "noise_threshold": nth,
                "throughput": _mean([r.throughput for r in reps]),
                "avg_fidelity": _mean([r.avg_fidelity for r in reps]),
                "avg_latency": _mean([r.avg_latency for r in reps]),
            }
        )
    return rows
