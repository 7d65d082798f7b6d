"""Solver-agnostic schedule: routed paths with multiplicities and per-hop purification."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSchedule
from .formulation import IlpInstance, VarKind
from .netmodel import RoutingGraph


@dataclass(frozen=True)
class Route:
    """``multiplicity`` messages along ``nodes``.

    ``purification[i]`` is the number of extra pairs each message consumes
    to purify hop ``i``.
    """

    request_id: str
    nodes: tuple[str, ...]
    multiplicity: int
    purification: tuple[int, ...]
    noise: float = 0.0

    @property
    def hops(self) -> list[tuple[str, str]]:
        return list(zip(self.nodes, self.nodes[1:]))

    @property
    def interior(self) -> tuple[str, ...]:
        return self.nodes[1:-1]


@dataclass
class Schedule:
    solver: str
    routes: list[Route] = field(default_factory=list)
    residual: dict[str, int] = field(default_factory=dict)
    trace: list[str] = field(default_factory=list)

    @property
    def total_scheduled(self) -> int:
        return sum(r.multiplicity for r in self.routes)

    def scheduled_for(self, request_id: str) -> int:
        return sum(r.multiplicity for r in self.routes if r.request_id == request_id)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "total_scheduled": self.total_scheduled,
            "routes": [
                {
                    "request": r.request_id,
                    "path": list(r.nodes),
                    "multiplicity": r.multiplicity,
                    "purification": list(r.purification),
                    "noise": r.noise,
                }
                for r in self.routes
            ],
            "residual": dict(sorted(self.residual.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> Schedule:
        routes = [
            Route(r["request"], tuple(r["path"]), int(r["multiplicity"]), tuple(r["purification"]), float(r["noise"]))
            for r in d["routes"]
        ]
        return cls(d["solver"], routes, {k: int(v) for k, v in d["residual"].items()})

    def aggregate(self, inst: IlpInstance) -> np.ndarray:
        """Re-aggregate routes into the instance's ``(Y, x, phi, alpha)`` vector."""
        vals = np.zeros(inst.num_vars)
        for r in self.routes:
            k = inst.request_index(r.request_id)
            vals[inst.var(VarKind.Y, k)] += r.multiplicity
            for (u, v), extra in zip(r.hops, r.purification):
                a = inst.arc_index(u, v)
                vals[inst.var(VarKind.X, k, a)] += r.multiplicity
                vals[inst.var(VarKind.PHI, k, a)] += r.multiplicity * extra
            for node in r.interior:
                vals[inst.var(VarKind.ALPHA, k, node)] += r.multiplicity
        return vals


def resource_usage(g: RoutingGraph, routes: list[Route]) -> tuple[dict[str, int], dict[str, int]]:
    """Entanglements used per edge id and memory slots used per repeater."""
    edge_use: dict[str, int] = {}
    node_use: dict[str, int] = {}
    for r in routes:
        for (u, v), extra in zip(r.hops, r.purification):
            e = g.edge_between(u, v)
            if e is None:
                raise InfeasibleSchedule(f"route for {r.request_id} uses missing link {u}-{v}")
            edge_use[e.id] = edge_use.get(e.id, 0) + r.multiplicity * (1 + extra)
        for node in r.interior:
            node_use[node] = node_use.get(node, 0) + r.multiplicity
    return edge_use, node_use


def assert_fits(g: RoutingGraph, routes: list[Route]) -> None:
    edge_use, node_use = resource_usage(g, routes)
    caps = {e.id: e.capacity for e in g.edges}
    for eid, used in edge_use.items():
        cap = caps[eid]
        if used > cap:
            raise InfeasibleSchedule(f"link {eid} over capacity: {used} > {cap}")
    for nid, used in node_use.items():
        node = g.nodes[nid]
        if not node.is_repeater:
            raise InfeasibleSchedule(f"route relays through non-repeater {nid}")
        if used > node.memory_capacity:
            raise InfeasibleSchedule(f"repeater {nid} over capacity: {used} > {node.memory_capacity}")
