"""LP-relaxation router: solve the relaxed program, decompose flows into paths, round with repair."""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import LpError
from .formulation import IlpInstance, Request, VarKind, build_ilp, path_noise
from .netmodel import RoutingGraph
from .schedule import Route, Schedule
from .simplex import LpStatus, simplex

FLOW_EPS = 1e-9
# noise budget kept back so the exact row check still passes after rounding
NOISE_MARGIN = 1e-7


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpSolution:
    values: np.ndarray
    objective: float
    status: Status
    iterations: int = 0


# ----------------------------------------------------------------------------
# presolve


@dataclass
class _Reduced:
    keep_vars: np.ndarray
    keep_rows: list[int]
    A: sparse.csr_matrix
    b: np.ndarray
    senses: list[str]
    lower: np.ndarray
    upper: np.ndarray
    c: np.ndarray


def _presolve(inst: IlpInstance) -> _Reduced:
    """Drop variables fixed at zero and rows that become empty or redundant.

    Equality rows with zero right-hand side whose remaining coefficients share
    one sign force all their variables to zero; this cascades until stable.
    Every routing variable has lower bound 0, which the rules rely on.
    """
    n = inst.num_vars
    fixed = inst.upper <= inst.lower
    if np.any(fixed & (inst.lower != 0)):
        raise LpError("presolve expects variables fixed at zero only")
    live_rows = set(range(len(inst.rows)))
    changed = True
    while changed:
        changed = False
        for i in sorted(live_rows):
            row = inst.rows[i]
            terms = [(j, c) for j, c in zip(row.indices, row.coefs) if c != 0 and not fixed[j]]
            if not terms:
                ok = {"<=": 0 <= row.rhs, ">=": 0 >= row.rhs, "=": row.rhs == 0}[row.sense]
                if not ok:
                    raise LpError(f"row {row.name} infeasible at presolve")
                live_rows.discard(i)
                changed = True
                continue
            pos = all(c > 0 for _, c in terms)
            neg = all(c < 0 for _, c in terms)
            if row.sense == "=" and row.rhs == 0 and (pos or neg):
                for j, _ in terms:
                    fixed[j] = True
                live_rows.discard(i)
                changed = True
            elif (row.sense == ">=" and row.rhs <= 0 and pos) or (row.sense == "<=" and row.rhs >= 0 and neg):
                live_rows.discard(i)
                changed = True
    keep_vars = np.flatnonzero(~fixed)
    col_map = -np.ones(n, dtype=np.int64)
    col_map[keep_vars] = np.arange(keep_vars.size)
    keep_rows = sorted(live_rows)
    data, ri, ci = [], [], []
    for new_i, i in enumerate(keep_rows):
        row = inst.rows[i]
        for j, c in zip(row.indices, row.coefs):
            if c != 0 and not fixed[j]:
                data.append(c)
                ri.append(new_i)
                ci.append(col_map[j])
    A = sparse.csr_matrix((data, (ri, ci)), shape=(len(keep_rows), keep_vars.size))
    return _Reduced(
        keep_vars,
        keep_rows,
        A,
        np.array([inst.rows[i].rhs for i in keep_rows]),
        [inst.rows[i].sense for i in keep_rows],
        inst.lower[keep_vars],
        inst.upper[keep_vars],
        -inst.objective[keep_vars],
    )


def solve_lp(inst: IlpInstance, pivot_rule: str = "bland") -> LpSolution:
    """Optimal vertex of the relaxation (integrality dropped).

    Raises:
        LpError: if the relaxation is infeasible or unbounded, which a
            well-formed routing instance cannot be (zero flow is feasible
            and the objective is capped by the message sizes).
    """
    values = np.zeros(inst.num_vars)
    if inst.num_vars == 0:
        return LpSolution(values, 0.0, Status.OPTIMAL)
    red = _presolve(inst)
    if red.keep_vars.size == 0:
        return LpSolution(values, 0.0, Status.OPTIMAL)
    res = simplex(red.c, red.A, red.senses, red.b, red.lower, red.upper, pivot_rule=pivot_rule)
    if res.status is not LpStatus.OPTIMAL:
        raise LpError(f"relaxation ended {res.status.value}")
    values[red.keep_vars] = res.x
    return LpSolution(values, float(inst.objective @ values), Status.OPTIMAL, res.iterations)


# ----------------------------------------------------------------------------
# flow decomposition


@dataclass(frozen=True)
class WeightedPath:
    request: int
    arcs: tuple[int, ...]
    weight: float


def decompose_flow(inst: IlpInstance, values: np.ndarray, k: int) -> list[WeightedPath]:
    """Split request ``k``'s arc flow into simple source-destination paths.

    Walks from the source along the lowest-index positive arc; a revisited
    node closes a cycle, whose flow is cancelled. Each extracted path
    removes its bottleneck arc, so at most one path per arc is produced.
    Flow left over after the source is drained only forms cycles and is
    discarded.
    """
    req = inst.requests[k]
    flow = {}
    for a in range(len(inst.arcs)):
        v = values[inst.var(VarKind.X, k, a)]
        if v > FLOW_EPS:
            flow[a] = float(v)
    out_arcs: dict[str, list[int]] = {}
    for a in sorted(flow):
        out_arcs.setdefault(inst.arcs[a].tail, []).append(a)

    def next_arc(u: str) -> int | None:
        for a in out_arcs.get(u, ()):
            if flow.get(a, 0.0) > FLOW_EPS:
                return a
        return None

    def drain(arcs: list[int], amount: float) -> None:
        for a in arcs:
            flow[a] -= amount
            if flow[a] <= FLOW_EPS:
                flow[a] = 0.0

    paths: list[WeightedPath] = []
    while True:
        a0 = next_arc(req.source)
        if a0 is None:
            break
        walk = [a0]
        seen = {req.source: 0, inst.arcs[a0].head: 1}
        u = inst.arcs[a0].head
        while u != req.destination:
            a = next_arc(u)
            if a is None:
                # dead end from numerical dust: drop the arc that led here
                flow[walk[-1]] = 0.0
                walk = []
                break
            v = inst.arcs[a].head
            if v in seen:
                cyc = walk[seen[v] :] + [a]
                drain(cyc, min(flow[c] for c in cyc))
                walk = walk[: seen[v]]
                for node in [n for n, pos in seen.items() if pos > seen[v]]:
                    del seen[node]
                u = v
                if not walk and u == req.source:
                    break
                continue
            walk.append(a)
            seen[v] = len(walk)
            u = v
        if walk and u == req.destination:
            w = min(flow[a] for a in walk)
            drain(walk, w)
            paths.append(WeightedPath(k, tuple(walk), w))
    return paths


# ----------------------------------------------------------------------------
# rounding with repair


def _purification_plan(inst: IlpInstance, arcs: Sequence[int], deficit: float) -> list[int] | None:
    """Per-message extra pairs on each hop to cut ``deficit`` noise, highest-noise links first."""
    plan = [0] * len(arcs)
    if deficit <= 0:
        return plan
    order = sorted(
        (i for i, a in enumerate(arcs) if inst.arcs[a].edge.purification_effect > 0),
        key=lambda i: (-inst.arcs[arcs[i]].edge.noise, inst.arcs[arcs[i]].edge.id),
    )
    for i in order:
        e = inst.arcs[arcs[i]].edge
        units = min(e.purification_count, math.ceil(deficit / e.purification_effect - 1e-12))
        plan[i] = units
        deficit -= units * e.purification_effect
        if deficit <= 1e-12:
            return plan
    return None


def _max_plan(inst: IlpInstance, arcs: Sequence[int]) -> list[int]:
    return [inst.arcs[a].edge.purification_count if inst.arcs[a].edge.purification_effect > 0 else 0 for a in arcs]


def round_and_repair(
    inst: IlpInstance, frac: LpSolution, *, top_up: bool = True, trace: bool = False
) -> Schedule:
    """Turn a fractional optimum into a feasible integral schedule.

    Paths from every request's flow decomposition are visited by descending
    weight (ties: arc ids, then request order). Each path receives up to
    ``ceil(weight)`` messages, capped by remaining link and memory capacity,
    residual demand and the request's noise budget: the aggregate noise of
    its messages may not exceed ``threshold * messages``, so quiet paths bank
    slack that noisier ones can spend. Paths over the threshold try no extra
    purification, then the least purification on their noisiest purifiable
    links that brings one message under the threshold (or the most available
    when none does), keeping whichever option admits the most messages. With
    ``top_up`` a second pass offers the same paths any leftover demand.
    """
    if frac.status is not Status.OPTIMAL:
        raise LpError("round_and_repair needs an optimal relaxation")
    g = inst.graph
    nth = inst.noise_threshold
    paths: list[WeightedPath] = []
    for k in range(len(inst.requests)):
        paths.extend(decompose_flow(inst, frac.values, k))
    paths.sort(key=lambda p: (-p.weight, p.arcs, p.request))

    residual = {r.id: r.message_size for r in inst.requests}
    slack = {r.id: 0.0 for r in inst.requests}
    edge_left = {e.id: e.capacity for e in g.edges}
    node_left = {r: g.nodes[r].memory_capacity for r in inst.repeaters}
    sched = Schedule("linear", residual=residual)
    log = sched.trace if trace else None

    prepared = []
    for p in paths:
        nodes = (inst.arcs[p.arcs[0]].tail,) + tuple(inst.arcs[a].head for a in p.arcs)
        noise = path_noise(g, nodes)
        plans = [[0] * len(p.arcs)]
        if noise > nth:
            plan = _purification_plan(inst, p.arcs, noise - nth)
            plans.append(plan if plan is not None else _max_plan(inst, p.arcs))
        prepared.append((p, nodes, noise, plans))

    def allot(p: WeightedPath, nodes, noise, plans, target: int, tag: str) -> None:
        req = inst.requests[p.request]
        best = (0, plans[0], noise)
        for plan in plans:
            reduced = noise - sum(x * inst.arcs[arc].edge.purification_effect for arc, x in zip(p.arcs, plan))
            a = min(target, residual[req.id])
            for arc, extra in zip(p.arcs, plan):
                a = min(a, edge_left[inst.arcs[arc].edge.id] // (1 + extra))
            for r in nodes[1:-1]:
                a = min(a, node_left[r])
            if reduced > nth + 1e-12:
                a = min(a, max(0, math.floor((slack[req.id] - NOISE_MARGIN) / (reduced - nth))))
            if a > best[0]:
                best = (a, plan, reduced)
        a, plan, reduced = best
        if log is not None:
            log.append(
                f"{tag} {req.id} {'-'.join(nodes)} weight={p.weight:.6g} noise={noise:.6g} "
                f"target={target} assign={a}" + (" purification exhausted" if a == 0 and noise > nth else "")
            )
        if a < 1:
            return
        for arc, extra in zip(p.arcs, plan):
            edge_left[inst.arcs[arc].edge.id] -= a * (1 + extra)
        for r in nodes[1:-1]:
            node_left[r] -= a
        residual[req.id] -= a
        slack[req.id] += a * (nth - reduced)
        sched.routes.append(Route(req.id, nodes, a, tuple(plan), reduced))

    for p, nodes, noise, plans in prepared:
        allot(p, nodes, noise, plans, math.ceil(p.weight - 1e-9), "round")
    if top_up:
        for p, nodes, noise, plans in prepared:
            if residual[inst.requests[p.request].id] > 0:
                allot(p, nodes, noise, plans, residual[inst.requests[p.request].id], "topup")
    sched.routes = _merge(sched.routes)
    return sched


def _merge(routes: list[Route]) -> list[Route]:
    """Combine entries that share request, path and purification plan."""
    merged: dict[tuple, Route] = {}
    for r in routes:
        key = (r.request_id, r.nodes, r.purification)
        if key in merged:
            old = merged[key]
            merged[key] = Route(old.request_id, old.nodes, old.multiplicity + r.multiplicity, old.purification, old.noise)
        else:
            merged[key] = r
    return list(merged.values())


def linear_route(
    g: RoutingGraph,
    requests: Sequence[Request],
    noise_threshold: float,
    *,
    pivot_rule: str = "bland",
    trace: bool = False,
) -> Schedule:
    inst = build_ilp(g, requests, noise_threshold)
    frac = solve_lp(inst, pivot_rule=pivot_rule)
    return round_and_repair(inst, frac, trace=trace)
