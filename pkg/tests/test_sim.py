from __future__ import annotations

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from helpers import chain_graph as chain, graph, line_graph, user
from sgiq.config import Config, TrafficConfig
from sgiq.errors import InfeasibleSchedule
from sgiq.netmodel import ConstellationConfig, EdgeKind, GroundStation, Role, make_edge
from sgiq.physics import purified_fidelity
from sgiq.rng import substream
from sgiq.schedule import Route, Schedule
from sgiq.sim import (
    ROUND_COLUMNS,
    Network,
    build_network,
    compare_solvers,
    execute_round,
    generate_requests,
    repeater_noise_amendment,
    route_fidelity,
    run,
)


def small_cfg(**sim) -> Config:
    cfg = Config()
    net = replace(cfg.network, stations=14, switches=4)
    return replace(cfg, network=net, traffic=TrafficConfig(6, (1, 3), 0), sim=replace(cfg.sim, num_rounds=4, **sim))


# ---------------------------------------------------------------- execute_round


def test_direct_edge_always_succeeds():
    g, ids = chain(0)
    sched = Schedule("x", [Route("r", ids, 500, (0,))])
    out = execute_round(g, sched, np.random.default_rng(0), 0.1)
    assert out.executed == 500


def test_two_repeater_success_rate():
    g, ids = chain(2)
    sched = Schedule("x", [Route("r", ids, 10_000, (0, 0, 0))])
    out = execute_round(g, sched, substream(5, "mc"), 0.95)
    assert abs(out.executed / 10_000 - 0.9025) <= 0.01


def test_purification_lifts_fidelity():
    g = graph([user("A"), user("B")], [make_edge("A", "B", EdgeKind.GROUND, 5, 0.75)])
    assert route_fidelity(g, ("A", "B"), (4,)) >= 0.99
    out = execute_round(g, Schedule("x", [Route("r", ("A", "B"), 1, (4,))]), np.random.default_rng(0))
    assert out.messages[0].fidelity >= 0.99


def test_fidelity_is_product_of_hops():
    g, ids = chain(2, fidelity=0.9)
    plan = (1, 0, 2)
    want = purified_fidelity(0.9, 1) * 0.9 * purified_fidelity(0.9, 2)
    assert route_fidelity(g, ids, plan) == pytest.approx(want, abs=1e-9)


def test_over_capacity_schedule_rejected():
    g = line_graph(cap_edge=1)
    with pytest.raises(InfeasibleSchedule):
        execute_round(g, Schedule("x", [Route("r", ("A", "S", "B"), 2, (0, 0))]), np.random.default_rng(0))
    with pytest.raises(InfeasibleSchedule):
        execute_round(g, Schedule("x", [Route("r", ("A", "S", "B"), 1, (1, 0))]), np.random.default_rng(0))


def test_noise_amendment_from_swap_probability():
    assert repeater_noise_amendment(0.95) == pytest.approx(-math.log(0.95))
    assert repeater_noise_amendment(1.0) == 0.0
    assert math.isinf(repeater_noise_amendment(0.0))


def test_generate_requests_distinct_endpoints():
    reqs = generate_requests(["a", "b", "c"], 50, (2, 5), np.random.default_rng(1), "p-")
    assert len({r.id for r in reqs}) == 50
    assert all(r.source != r.destination and 2 <= r.message_size <= 5 for r in reqs)


# ---------------------------------------------------------------- run


def test_no_requests_convention():
    cfg = small_cfg()
    cfg = replace(cfg, traffic=TrafficConfig(0, (1, 1), 0))
    rep = run(cfg)
    assert rep.requested == 0
    assert rep.throughput == 1.0
    assert rep.avg_fidelity is None and rep.avg_latency is None


def _two_station_network(fidelity: float = 1.0) -> Network:
    stations = (GroundStation("a", 0.0, 0.0, Role.USER), GroundStation("b", 0.0, 1.0, Role.USER))
    edge = make_edge("a", "b", EdgeKind.GROUND, 10, fidelity)
    cc = ConstellationConfig(53.0, 1, 1, 0, 550_000.0, 20.0)
    return Network(cc, stations, (edge,), (), (1, 1))


def test_single_perfect_edge():
    cfg = replace(Config(), traffic=TrafficConfig(1, (1, 1), 0))
    for solver in ("linear", "greedy"):
        c = replace(cfg, sim=replace(cfg.sim, solver=solver))
        rep = run(c, _two_station_network())
        assert rep.throughput == 1.0
        assert rep.avg_fidelity == 1.0
        assert rep.avg_latency == 1.0


def test_identical_reports_on_degenerate_scenario(monkeypatch):
    import sgiq.sim as sim

    cfg = replace(Config(), traffic=TrafficConfig(1, (2, 2), 0))
    monkeypatch.setattr(sim, "build_network", lambda *a, **k: _two_station_network(0.98))
    cmp = compare_solvers(
        replace(cfg, sim=replace(cfg.sim, solver="linear")),
        replace(cfg, sim=replace(cfg.sim, solver="greedy")),
        [1, 2],
    )
    for a, b in zip(*cmp.reports):
        assert (a.requested, a.executed, a.throughput, a.avg_fidelity, a.avg_latency) == (
            b.requested,
            b.executed,
            b.throughput,
            b.avg_fidelity,
            b.avg_latency,
        )
    table = cmp.table()
    assert table["linear"] == table["greedy"]


@pytest.mark.parametrize("solver", ["linear", "greedy"])
def test_run_conservation_and_latency(solver):
    cfg = small_cfg(solver=solver, scenario="insufficient", seed=4)
    cfg = replace(cfg, traffic=TrafficConfig(6, (1, 3), 2))
    rep = run(cfg)
    assert rep.executed + rep.failed + rep.never_scheduled == rep.requested
    assert rep.throughput == rep.executed / rep.requested
    if rep.avg_latency is not None:
        assert rep.avg_latency >= 1.0
    assert sum(r.executed for r in rep.rounds) == rep.executed
    assert rep.rounds[-1].residual == rep.requested - rep.executed
    assert rep.metadata["latency_unit"] == "rounds"


@pytest.mark.parametrize("solver", ["linear", "greedy"])
def test_run_deterministic(solver):
    cfg = small_cfg(solver=solver, seed=9)
    a, b = run(cfg), run(cfg)
    assert a.summary_json() == b.summary_json()
    assert a.rounds_csv() == b.rounds_csv()
    c = run(replace(cfg, sim=replace(cfg.sim, seed=10)))
    assert c.summary_json() != a.summary_json()


def test_outputs_shape():
    rep = run(small_cfg())
    lines = rep.rounds_csv().splitlines()
    assert lines[0] == ",".join(ROUND_COLUMNS)
    assert len(lines) == 1 + 4
    d = json.loads(rep.summary_json({"config": {"x": 1}}))
    for key in ("requested", "executed", "failed", "never_scheduled", "throughput", "avg_fidelity", "avg_latency"):
        assert key in d
    assert d["config"] == {"x": 1}


def test_scenarios_set_capacities():
    cfg = small_cfg()
    for scenario, (lo, hi) in (("abundant", (8, 16)), ("insufficient", (1, 3))):
        net = build_network(cfg, scenario, 3)
        assert all(lo <= e.capacity <= hi for e in net.ground_edges)
        assert net.freespace_capacity == (lo, hi)
