from __future__ import annotations

import pytest

from helpers import example_graph, graph, random_instance, sat, switch, user
from sgiq.formulation import Request, brute_force_optimum, build_ilp, check_solution, path_noise
from sgiq.greedy import build_subgraphs, candidate_paths, greedy_route, shortest_path
from sgiq.netmodel import EdgeKind, make_edge

REQ = Request("r", "A", "B", 3)


def test_subgraph_partition():
    g = example_graph()
    g1, g2, g3 = build_subgraphs(g)
    assert all(e.kind is EdgeKind.GROUND for e in g1.edges)
    assert all(e.kind is EdgeKind.FREE_SPACE for e in g3.edges)
    assert len(g1.edges) + len(g3.edges) == len(g2.edges)

    ground_only = graph([user("A"), user("B"), switch("S")], [make_edge("A", "S", EdgeKind.GROUND, 1, 0.9)])
    assert build_subgraphs(ground_only)[2].edges == ()
    space_only = graph([user("A"), sat("T")], [make_edge("A", "T", EdgeKind.FREE_SPACE, 1, 0.9)])
    assert build_subgraphs(space_only)[0].edges == ()


def test_candidate_paths_example():
    cands = candidate_paths(build_subgraphs(example_graph()), REQ, 0.5)
    got = [(c.subgraph, c.nodes, round(c.noise, 9), c.cost) for c in cands]
    assert got == [
        ("G1", ("A", "S", "B"), 0.45, 2),
        ("G2", ("A", "T", "B"), 0.15, 2),
        ("G3", ("A", "T", "B"), 0.15, 2),
    ]


def test_candidate_paths_threshold():
    cands = candidate_paths(build_subgraphs(example_graph()), REQ, 0.3)
    assert [c.subgraph for c in cands] == ["G2", "G3"]


def test_greedy_example():
    sched = greedy_route(example_graph(), [REQ], 0.5)
    assert [(r.nodes, r.multiplicity) for r in sched.routes] == [(("A", "S", "B"), 2), (("A", "T", "B"), 1)]
    assert sched.total_scheduled == 3
    assert sched.residual == {"r": 0}
    assert all(set(r.purification) == {0} for r in sched.routes)


def test_greedy_empty_and_zero_capacity():
    assert greedy_route(example_graph(), [], 0.5).routes == []
    nodes = [user("A"), user("B"), switch("S", 0)]
    edges = [make_edge("A", "S", EdgeKind.GROUND, 0, 0.9), make_edge("S", "B", EdgeKind.GROUND, 0, 0.9)]
    sched = greedy_route(graph(nodes, edges), [REQ], 1.0)
    assert sched.routes == []
    assert sched.residual == {"r": 3}


def test_users_do_not_relay():
    g = graph(
        [user("A"), user("B"), user("C")],
        [make_edge("A", "C", EdgeKind.GROUND, 5, 1.0), make_edge("C", "B", EdgeKind.GROUND, 5, 1.0)],
    )
    assert shortest_path(g, "A", "B") is None
    assert greedy_route(g, [REQ], 1.0).total_scheduled == 0


def test_sort_by_noise_changes_order():
    # two requests share a bottleneck; by cost the earlier (longer, quieter) request still loses
    nodes = [user("A"), user("B"), user("C"), switch("S", 10), switch("U", 10)]
    edges = [
        make_edge("A", "S", EdgeKind.GROUND, 1, 0.99),
        make_edge("S", "U", EdgeKind.GROUND, 1, 0.99),
        make_edge("U", "B", EdgeKind.GROUND, 1, 0.99),
        make_edge("C", "S", EdgeKind.GROUND, 1, 0.8),
    ]
    g = graph(nodes, edges)
    reqs = [Request("long", "A", "B", 1), Request("short", "C", "A", 1)]
    by_cost = greedy_route(g, reqs, 1.0, sort_by="cost")
    by_noise = greedy_route(g, reqs, 1.0, sort_by="noise")
    assert [r.request_id for r in by_cost.routes] == ["short"]
    assert [r.request_id for r in by_noise.routes] == ["long"]
    with pytest.raises(ValueError):
        greedy_route(g, reqs, 1.0, sort_by="hops")


@pytest.mark.parametrize("seed", range(100))
def test_greedy_feasible_and_bounded(seed):
    g, reqs, nth = random_instance(seed)
    inst = build_ilp(g, reqs, nth)
    sched = greedy_route(g, reqs, nth)
    assert check_solution(inst, sched.aggregate(inst)).feasible
    assert sched.total_scheduled <= brute_force_optimum(inst).objective_value
    for r in sched.routes:
        assert path_noise(g, r.nodes) <= nth
        assert r.noise == pytest.approx(path_noise(g, r.nodes), abs=1e-12)


def test_greedy_deterministic():
    g, reqs, nth = random_instance(7)
    assert greedy_route(g, reqs, nth).to_json() == greedy_route(g, reqs, nth).to_json()
