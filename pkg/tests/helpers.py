"""Shared graph builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from sgiq.formulation import Request
from sgiq.netmodel import EdgeKind, GroundStation, Role, RoutingGraph, Satellite, make_edge


def user(nid: str) -> GroundStation:
    return GroundStation(nid, 0.0, 0.0, Role.USER)


def switch(nid: str, cap: int = 10, sigma: float = 0.0) -> GroundStation:
    return GroundStation(nid, 0.0, 0.0, Role.SWITCH, cap, sigma)


def sat(nid: str, cap: int = 10, sigma: float = 0.0, slot: int = 0) -> Satellite:
    return Satellite(nid, 0, slot, cap, sigma)


def graph(nodes, edges) -> RoutingGraph:
    return RoutingGraph(0.0, {n.id: n for n in nodes}, tuple(edges))


def edge_mu(u: str, v: str, kind: EdgeKind, cap: int, mu: float):
    return make_edge(u, v, kind, cap, math.exp(-mu))


def example_graph() -> RoutingGraph:
    """Users A, B; switch S; satellite T; ground path via S and free-space path via T."""
    nodes = [user("A"), user("B"), switch("S", 10, 0.05), sat("T", 10, 0.05)]
    edges = [
        edge_mu("A", "S", EdgeKind.GROUND, 2, 0.20),
        edge_mu("S", "B", EdgeKind.GROUND, 2, 0.20),
        edge_mu("A", "T", EdgeKind.FREE_SPACE, 1, 0.05),
        edge_mu("T", "B", EdgeKind.FREE_SPACE, 1, 0.05),
    ]
    return graph(nodes, edges)


def line_graph(cap_edge: int = 5, cap_switch: int = 5, fidelity: float = 0.95, sigma: float = 0.0) -> RoutingGraph:
    """A - S - B over ground links."""
    nodes = [user("A"), user("B"), switch("S", cap_switch, sigma)]
    edges = [
        make_edge("A", "S", EdgeKind.GROUND, cap_edge, fidelity),
        make_edge("S", "B", EdgeKind.GROUND, cap_edge, fidelity),
    ]
    return graph(nodes, edges)


def chain_graph(repeaters: int, cap: int = 20_000, fidelity: float = 0.97) -> tuple[RoutingGraph, tuple[str, ...]]:
    """A - S0 - ... - S{r-1} - B over ground links with ample capacity."""
    ids = ["A"] + [f"S{i}" for i in range(repeaters)] + ["B"]
    nodes = [user("A"), user("B")] + [switch(i, cap) for i in ids[1:-1]]
    edges = [make_edge(u, v, EdgeKind.GROUND, cap, fidelity) for u, v in zip(ids, ids[1:])]
    return graph(nodes, edges), tuple(ids)


def random_instance(seed: int) -> tuple[RoutingGraph, list[Request], float]:
    """Small mixed ground/space instance: <= 6 nodes, <= 10 edges, capacities <= 3, <= 3 requests."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    n_users = int(rng.integers(2, n))
    nodes = []
    for i in range(n):
        if i < n_users:
            nodes.append(user(f"u{i}"))
        elif rng.random() < 0.5:
            nodes.append(switch(f"s{i}", int(rng.integers(0, 4)), float(rng.uniform(0.0, 0.1))))
        else:
            nodes.append(sat(f"t{i}", int(rng.integers(0, 4)), float(rng.uniform(0.0, 0.1)), slot=i))
    pairs = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1 :]]
    pairs = [(a, b) for a, b in pairs if not (isinstance(a, Satellite) and isinstance(b, Satellite))]
    order = rng.permutation(len(pairs))[: int(rng.integers(1, min(10, len(pairs)) + 1))]
    edges = []
    for i in sorted(order):
        a, b = pairs[i]
        kind = EdgeKind.FREE_SPACE if isinstance(a, Satellite) or isinstance(b, Satellite) else EdgeKind.GROUND
        edges.append(make_edge(a.id, b.id, kind, int(rng.integers(0, 4)), float(rng.uniform(0.7, 1.0))))
    users = [nd.id for nd in nodes if isinstance(nd, GroundStation) and nd.role is Role.USER]
    reqs = []
    for k in range(int(rng.integers(1, 4))):
        s, d = rng.choice(len(users), size=2, replace=False)
        reqs.append(Request(f"q{k}", users[int(s)], users[int(d)], int(rng.integers(1, 4))))
    nth = float(rng.uniform(0.05, 1.2))
    return graph(nodes, edges), reqs, nth
