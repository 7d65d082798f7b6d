"""Greedy router: shortest paths on ground-only, full and free-space-only subgraphs."""

from __future__ import annotations

import heapq
from collections.abc import Sequence
from dataclasses import dataclass

from .formulation import Request
from .netmodel import EdgeKind, RoutingGraph
from .schedule import Route, Schedule

SUBGRAPHS = ("G1", "G2", "G3")


@dataclass(frozen=True)
class CandidatePath:
    request_id: str
    subgraph: str
    nodes: tuple[str, ...]
    noise: float
    cost: int
    demand: int


def build_subgraphs(g: RoutingGraph) -> tuple[RoutingGraph, RoutingGraph, RoutingGraph]:
    return g.subgraph(EdgeKind.GROUND), g, g.subgraph(EdgeKind.FREE_SPACE)


def shortest_path(g: RoutingGraph, src: str, dst: str) -> tuple[tuple[str, ...], float] | None:
    """Least-noise path relaying only through repeaters.

    Step weight is the link noise plus the next node's amendment when that
    node is a repeater (endpoints are users and add nothing). Equal
    distances settle the smaller node id first.
    """
    dist = {src: 0.0}
    prev: dict[str, str] = {}
    done = set()
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            break
        if u != src and not g.is_repeater(u):
            continue
        for v, e in g.neighbors(u):
            if v in done:
                continue
            node = g.nodes[v]
            nd = d + e.noise + (node.noise_amendment if node.is_repeater else 0.0)
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if dst not in done:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return tuple(reversed(path)), dist[dst]


def candidate_paths(
    subgraphs: Sequence[RoutingGraph], request: Request, noise_threshold: float
) -> list[CandidatePath]:
    out = []
    for tag, sub in zip(SUBGRAPHS, subgraphs):
        found = shortest_path(sub, request.source, request.destination)
        if found is None:
            continue
        nodes, noise = found
        if noise <= noise_threshold:
            out.append(CandidatePath(request.id, tag, nodes, noise, len(nodes) - 1, request.message_size))
    return out


def greedy_route(
    g: RoutingGraph,
    requests: Sequence[Request],
    noise_threshold: float,
    sort_by: str = "cost",
) -> Schedule:
    """Allocate candidates set by set (G1, G2, G3), cheapest first, without re-routing.

    ``sort_by`` selects the within-set order: hop count (``"cost"``) or path
    noise (``"noise"``); ties go to the earlier request.
    """
    if sort_by not in ("cost", "noise"):
        raise ValueError(f"sort_by must be 'cost' or 'noise', not {sort_by!r}")
    subs = build_subgraphs(g)
    order = {r.id: i for i, r in enumerate(requests)}
    sets: dict[str, list[CandidatePath]] = {tag: [] for tag in SUBGRAPHS}
    for req in requests:
        for cand in candidate_paths(subs, req, noise_threshold):
            sets[cand.subgraph].append(cand)

    residual = {r.id: r.message_size for r in requests}
    edge_left = {e.id: e.capacity for e in g.edges}
    node_left = {n: g.nodes[n].memory_capacity for n in g.repeater_set}
    sched = Schedule("greedy", residual=residual)
    for tag in SUBGRAPHS:
        key = (lambda c: (c.cost, order[c.request_id])) if sort_by == "cost" else (
            lambda c: (c.noise, order[c.request_id])
        )
        for cand in sorted(sets[tag], key=key):
            eids = [g.edge_between(u, v).id for u, v in zip(cand.nodes, cand.nodes[1:])]
            alpha = residual[cand.request_id]
            for eid in eids:
                alpha = min(alpha, edge_left[eid])
            for r in cand.nodes[1:-1]:
                alpha = min(alpha, node_left[r])
            if alpha < 1:
                continue
            for eid in eids:
                edge_left[eid] -= alpha
            for r in cand.nodes[1:-1]:
                node_left[r] -= alpha
            residual[cand.request_id] -= alpha
            sched.routes.append(
                Route(cand.request_id, cand.nodes, alpha, (0,) * cand.cost, cand.noise)
            )
    return sched
