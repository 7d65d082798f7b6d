"""Integer program for concurrent entanglement routing.

Variables (per request ``k``): the message count ``Y_k``, entanglements
``x`` and extra purification pairs ``phi`` on every directed arc, and the
swap count ``alpha`` at every repeater. Undirected links become two opposed
arcs that share one capacity row.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigError, DimensionMismatch, TooLarge
from .netmodel import Edge, RoutingGraph, Role

FEAS_TOL = 1e-7
NANO = 10**9


@dataclass(frozen=True)
class Request:
    id: str
    source: str
    destination: str
    message_size: int

    def __post_init__(self) -> None:
        if self.source == self.destination:
            raise ConfigError(f"request {self.id}: source equals destination")
        if self.message_size < 1:
            raise ConfigError(f"request {self.id}: message_size must be >= 1")


class VarKind(str, enum.Enum):
    Y = "Y"
    X = "x"
    PHI = "phi"
    ALPHA = "alpha"


@dataclass(frozen=True)
class VariableIndex:
    kind: VarKind
    request: int
    sub: int | str | None  # arc index for X/PHI, repeater id for ALPHA
    flat_index: int

    @property
    def name(self) -> str:
        if self.kind is VarKind.Y:
            return f"Y_{self.request}"
        return f"{self.kind.value}_{self.request}_{self.sub}"


@dataclass(frozen=True)
class Arc:
    tail: str
    head: str
    edge: Edge


@dataclass(frozen=True)
class Row:
    name: str
    family: str
    indices: tuple[int, ...]
    coefs: tuple[float, ...]
    sense: str  # "<=", "=", ">="
    rhs: float


@dataclass(frozen=True)
class IlpInstance:
    graph: RoutingGraph
    requests: tuple[Request, ...]
    noise_threshold: float
    arcs: tuple[Arc, ...]
    repeaters: tuple[str, ...]
    variables: tuple[VariableIndex, ...]
    objective: np.ndarray
    rows: tuple[Row, ...]
    lower: np.ndarray
    upper: np.ndarray
    _lookup: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def var(self, kind: VarKind, k: int, sub: int | str | None = None) -> int:
        return self._lookup[(kind, k, sub)]

    def arc_index(self, tail: str, head: str) -> int:
        return self._lookup[("arc", tail, head)]

    def request_index(self, request_id: str) -> int:
        return self._lookup[("req", request_id)]

    def matrix(self) -> sparse.csr_matrix:
        data, ri, ci = [], [], []
        for i, row in enumerate(self.rows):
            data.extend(row.coefs)
            ci.extend(row.indices)
            ri.extend([i] * len(row.indices))
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(self.rows), self.num_vars))

    def to_lp_text(self) -> str:
        return to_lp_text(self)


def _useful_arcs(g: RoutingGraph, arcs: Sequence[Arc], src: str, dst: str) -> list[bool]:
    """Mark arcs that can lie on a source-to-destination walk through repeaters only."""

    def passable(n: str) -> bool:
        return g.is_repeater(n)

    fwd = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        if u != src and not passable(u):
            continue
        for v, _ in g.neighbors(u):
            if v not in fwd and v != src:
                fwd.add(v)
                stack.append(v)
    bwd = {dst}
    stack = [dst]
    while stack:
        v = stack.pop()
        if v != dst and not passable(v):
            continue
        for u, _ in g.neighbors(v):
            if u not in bwd and u != dst:
                bwd.add(u)
                stack.append(u)
    out = []
    for a in arcs:
        ok = (
            a.tail in fwd
            and a.head in bwd
            and a.tail != dst
            and a.head != src
            and (a.tail == src or passable(a.tail))
            and (a.head == dst or passable(a.head))
        )
        out.append(ok)
    return out


def build_ilp(g: RoutingGraph, requests: Sequence[Request], noise_threshold: float) -> IlpInstance:
    """Assemble the routing integer program for one round.

    Arcs touching a user other than the request's endpoints, or that cannot
    lie on any source-to-destination path, get upper bound 0; ``phi`` is
    also fixed at 0 where purification has no effect. Neither restriction
    changes the integer optimum.
    """
    if noise_threshold < 0:
        raise ConfigError("noise threshold must be non-negative")
    requests = tuple(requests)
    ids = set()
    for r in requests:
        for end in (r.source, r.destination):
            if end not in g.nodes:
                raise ConfigError(f"request {r.id}: unknown node {end}")
            if g.nodes[end].role is not Role.USER:
                raise ConfigError(f"request {r.id}: endpoint {end} is not a user")
        if r.id in ids:
            raise ConfigError(f"duplicate request id {r.id}")
        ids.add(r.id)

    arcs = []
    for e in g.edges:
        a, b = e.endpoints
        arcs.append(Arc(a, b, e))
        arcs.append(Arc(b, a, e))
    arcs = tuple(arcs)
    reps = tuple(g.repeaters())
    K, A = len(requests), len(arcs)

    variables: list[VariableIndex] = []
    lookup: dict = {}

    def add(kind: VarKind, k: int, sub) -> None:
        v = VariableIndex(kind, k, sub, len(variables))
        lookup[(kind, k, sub)] = v.flat_index
        variables.append(v)

    for k in range(K):
        add(VarKind.Y, k, None)
    for k in range(K):
        for a in range(A):
            add(VarKind.X, k, a)
        for a in range(A):
            add(VarKind.PHI, k, a)
        for r in reps:
            add(VarKind.ALPHA, k, r)
    for i, a in enumerate(arcs):
        lookup[("arc", a.tail, a.head)] = i
    for k, r in enumerate(requests):
        lookup[("req", r.id)] = k

    n = len(variables)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    objective = np.zeros(n)
    X = lambda k, a: lookup[(VarKind.X, k, a)]  # noqa: E731
    P = lambda k, a: lookup[(VarKind.PHI, k, a)]  # noqa: E731
    for k, req in enumerate(requests):
        yk = lookup[(VarKind.Y, k, None)]
        objective[yk] = 1.0
        upper[yk] = req.message_size
        useful = _useful_arcs(g, arcs, req.source, req.destination)
        for a, arc in enumerate(arcs):
            if not useful[a]:
                upper[X(k, a)] = 0.0
            if not useful[a] or arc.edge.purification_effect == 0.0:
                upper[P(k, a)] = 0.0

    rows: list[Row] = []

    def row(name, family, terms, sense, rhs=0.0):
        idx = tuple(i for i, _ in terms)
        co = tuple(float(c) for _, c in terms)
        rows.append(Row(name, family, idx, co, sense, float(rhs)))

    into: dict[str, list[int]] = {nid: [] for nid in g.nodes}
    outof: dict[str, list[int]] = {nid: [] for nid in g.nodes}
    for i, a in enumerate(arcs):
        into[a.head].append(i)
        outof[a.tail].append(i)
    arcs_of_edge: dict[str, list[int]] = {}
    for i, a in enumerate(arcs):
        arcs_of_edge.setdefault(a.edge.id, []).append(i)

    for k, req in enumerate(requests):
        row(f"init[{k}]", "init", [(X(k, a), 1.0) for a in into[req.source]], "=")
        row(f"term[{k}]", "term", [(X(k, a), 1.0) for a in outof[req.destination]], "=")
    for k, req in enumerate(requests):
        yk = lookup[(VarKind.Y, k, None)]
        row(f"src[{k}]", "flow", [(X(k, a), 1.0) for a in outof[req.source]] + [(yk, -1.0)], "=")
        row(f"sink[{k}]", "flow", [(X(k, a), 1.0) for a in into[req.destination]] + [(yk, -1.0)], "=")
    for k in range(K):
        for r in reps:
            al = lookup[(VarKind.ALPHA, k, r)]
            row(f"in[{k},{r}]", "conserve", [(X(k, a), 1.0) for a in into[r]] + [(al, -1.0)], "=")
            row(f"out[{k},{r}]", "conserve", [(X(k, a), 1.0) for a in outof[r]] + [(al, -1.0)], "=")
    if K:
        for e in g.edges:
            terms = []
            for k in range(K):
                for a in arcs_of_edge[e.id]:
                    terms += [(X(k, a), 1.0), (P(k, a), 1.0)]
            row(f"cap_e[{e.id}]", "cap_edge", terms, "<=", e.capacity)
    for k in range(K):
        for e in g.edges:
            terms = []
            for a in arcs_of_edge[e.id]:
                terms += [(X(k, a), e.noise), (P(k, a), -e.purification_effect)]
            row(f"purif[{k},{e.id}]", "purif", terms, ">=")
    if K:
        for r in reps:
            terms = [(X(k, a), 1.0) for k in range(K) for a in into[r]]
            row(f"cap_r[{r}]", "cap_node", terms, "<=", g.nodes[r].memory_capacity)
    for k in range(K):
        terms = []
        for a, arc in enumerate(arcs):
            terms += [(X(k, a), arc.edge.noise), (P(k, a), -arc.edge.purification_effect)]
        for r in reps:
            terms.append((lookup[(VarKind.ALPHA, k, r)], g.nodes[r].noise_amendment))
        terms.append((lookup[(VarKind.Y, k, None)], -noise_threshold))
        row(f"noise[{k}]", "noise", terms, "<=")

    return IlpInstance(
        graph=g,
        requests=requests,
        noise_threshold=float(noise_threshold),
        arcs=arcs,
        repeaters=reps,
        variables=tuple(variables),
        objective=objective,
        rows=tuple(rows),
        lower=lower,
        upper=upper,
        _lookup=lookup,
    )


# ----------------------------------------------------------------------------
# feasibility checking


@dataclass
class Solution:
    values: np.ndarray
    objective_value: float
    feasible: bool = False
    integral: bool = False


@dataclass
class FeasibilityReport:
    feasible: bool
    integral: bool
    objective: float
    slacks: np.ndarray
    violated: list[tuple[int, str, float]]

    def summary(self) -> str:
        head = f"feasible={self.feasible} integral={self.integral} objective={self.objective:g}"
        lines = [head] + [f"violated {i} {name} slack={s:.3e}" for i, name, s in self.violated]
        return "\n".join(lines)


def _slack(sense: str, activity: float, rhs: float) -> float:
    if sense == "<=":
        return rhs - activity
    if sense == ">=":
        return activity - rhs
    return -abs(activity - rhs)


def check_solution(inst: IlpInstance, sol: Solution | np.ndarray) -> FeasibilityReport:
    """Per-row slack and violated rows for a candidate solution.

    Integral vectors are checked exactly: each coefficient-value product is
    rounded to 1e-9 and summed in integers. Fractional vectors use a 1e-7
    tolerance.
    """
    values = np.asarray(sol.values if isinstance(sol, Solution) else sol, dtype=float)
    if values.shape != (inst.num_vars,):
        raise DimensionMismatch(f"expected {inst.num_vars} values, got {values.shape}")
    rounded = np.round(values)
    integral = bool(np.all(np.abs(values - rounded) <= 1e-9))
    violated: list[tuple[int, str, float]] = []
    slacks = np.zeros(len(inst.rows))

    if integral:
        ivals = [int(v) for v in rounded]
        for j, (v, lo, hi) in enumerate(zip(ivals, inst.lower, inst.upper)):
            if v < lo or v > hi:
                violated.append((-1, f"bound[{inst.variables[j].name}]", float(min(v - lo, hi - v))))
        for i, row in enumerate(inst.rows):
            act = 0
            for j, c in zip(row.indices, row.coefs):
                if ivals[j]:
                    act += round(c * ivals[j] * NANO)
            rhs = round(row.rhs * NANO)
            s = _slack(row.sense, act, rhs)
            slacks[i] = s / NANO
            if s < 0:
                violated.append((i, row.name, s / NANO))
        obj = float(sum(ivals[j] for j in np.flatnonzero(inst.objective)))
    else:
        for j, (v, lo, hi) in enumerate(zip(values, inst.lower, inst.upper)):
            if v < lo - FEAS_TOL or v > hi + FEAS_TOL:
                violated.append((-1, f"bound[{inst.variables[j].name}]", float(min(v - lo, hi - v))))
        for i, row in enumerate(inst.rows):
            act = float(sum(c * values[j] for j, c in zip(row.indices, row.coefs)))
            s = _slack(row.sense, act, row.rhs)
            slacks[i] = s
            if s < -FEAS_TOL:
                violated.append((i, row.name, s))
        obj = float(inst.objective @ values)
    return FeasibilityReport(not violated, integral, obj, slacks, violated)


# ----------------------------------------------------------------------------
# LP text export


def _fmt(x: float) -> str:
    return format(x, ".17g")


def to_lp_text(inst: IlpInstance) -> str:
    names = [v.name for v in inst.variables]

    def expr(idx, co) -> str:
        parts = []
        for j, c in zip(idx, co):
            if c == 0:
                continue
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {_fmt(abs(c))} {names[j]}")
        return " ".join(parts) if parts else "0"

    obj_idx = np.flatnonzero(inst.objective)
    out = ["\\ sgiq routing program", "Maximize", f" obj: {expr(obj_idx, inst.objective[obj_idx])}", "Subject To"]
    for row in inst.rows:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[row.sense]
        label = row.name.replace("[", "(").replace("]", ")").replace(",", "_").replace("~", "__")
        out.append(f" {label}: {expr(row.indices, row.coefs)} {sense} {_fmt(row.rhs)}")
    out.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = inst.lower[j], inst.upper[j]
        hi_s = "+inf" if math.isinf(hi) else _fmt(hi)
        out.append(f" {_fmt(lo)} <= {name} <= {hi_s}")
    if names:
        out.append("General")
        out.extend(f" {name}" for name in names)
    out.append("End")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------------
# exhaustive oracle


def simple_paths(g: RoutingGraph, src: str, dst: str, limit: int | None = None) -> list[tuple[str, ...]]:
    """All simple ``src``-``dst`` paths whose interior nodes are repeaters, in DFS order."""
    found: list[tuple[str, ...]] = []
    path = [src]
    onpath = {src}

    def dfs(u: str) -> None:
        for v, _ in g.neighbors(u):
            if v in onpath:
                continue
            if v == dst:
                found.append(tuple(path) + (v,))
                if limit is not None and len(found) > limit:
                    raise TooLarge("too many simple paths to enumerate")
            elif g.is_repeater(v):
                path.append(v)
                onpath.add(v)
                dfs(v)
                onpath.discard(v)
                path.pop()

    dfs(src)
    return found


def path_noise(g: RoutingGraph, nodes: Sequence[str]) -> float:
    """Per-message noise of a path: edge noise plus interior repeater amendments."""
    total = 0.0
    for u, v in zip(nodes, nodes[1:]):
        total += g.edge_between(u, v).noise
    for r in nodes[1:-1]:
        total += g.nodes[r].noise_amendment
    return total


def brute_force_optimum(inst: IlpInstance, limit: int = 10**7) -> Solution:
    """Exact integer optimum by exhaustive search.

    Integral flows decompose into simple paths plus cycles, and cycles never
    help (they add noise and use capacity), so the search enumerates, per
    request, multisets of simple paths of each size, then searches purification
    counts for the chosen flows. Ties resolve to the first maximiser in the
    enumeration order (requests in order, larger counts first, paths in DFS
    order). Every candidate is confirmed with ``check_solution``.

    Raises:
        TooLarge: if the multiset enumeration space exceeds ``limit``.
    """
    g = inst.graph
    K = len(inst.requests)
    if K == 0:
        return Solution(np.zeros(inst.num_vars), 0.0, True, True)
    nth = inst.noise_threshold

    paths: list[list[tuple[int, ...]]] = []
    space = 1
    for req in inst.requests:
        ps = simple_paths(g, req.source, req.destination, limit=limit)
        arcs = [tuple(inst.arc_index(u, v) for u, v in zip(p, p[1:])) for p in ps]
        paths.append(arcs)
        space *= _multiset_count(len(ps), req.message_size)
        if space > limit:
            raise TooLarge(f"enumeration space {space} exceeds limit {limit}")

    def interior(arcs: tuple[int, ...]) -> list[str]:
        return [inst.arcs[a].head for a in arcs[:-1]]

    # per path: edges used, noise without and with maximal purification
    info = []
    for k, plist in enumerate(paths):
        rows = []
        for arcs in plist:
            edges = [inst.arcs[a].edge for a in arcs]
            reps = interior(arcs)
            sig = sum(g.nodes[r].noise_amendment for r in reps)
            raw = sum(e.noise for e in edges) + sig
            floor = sum(e.noise for e in edges if e.purification_effect == 0.0) + sig
            rows.append((arcs, edges, reps, raw, floor))
        info.append(rows)

    edge_cap = {e.id: e.capacity for e in g.edges}
    node_cap = {r: g.nodes[r].memory_capacity for r in inst.repeaters}
    use_e = dict.fromkeys(edge_cap, 0)
    use_r = dict.fromkeys(node_cap, 0)
    chosen: list[list[int]] = [[] for _ in range(K)]
    remaining_m = [sum(r.message_size for r in inst.requests[k + 1 :]) for k in range(K)]
    best: dict = {"obj": -1, "values": None}
    total_m = sum(r.message_size for r in inst.requests)

    def assemble(phi: dict[tuple[int, int], int]) -> np.ndarray:
        vals = np.zeros(inst.num_vars)
        for k in range(K):
            vals[inst.var(VarKind.Y, k)] = len(chosen[k])
            for pi in chosen[k]:
                arcs, _, reps, _, _ = info[k][pi]
                for a in arcs:
                    vals[inst.var(VarKind.X, k, a)] += 1
                for r in reps:
                    vals[inst.var(VarKind.ALPHA, k, r)] += 1
        for (k, a), c in phi.items():
            vals[inst.var(VarKind.PHI, k, a)] += c
        return vals

    def purification_plan() -> dict[tuple[int, int], int] | None:
        # (k, edge) -> per-request x on that edge, first arc used
        deficits = []
        items = []
        for k in range(K):
            noise = sum(info[k][pi][3] for pi in chosen[k])
            d = noise - nth * len(chosen[k])
            if d <= 1e-12:
                continue
            x_on: dict[str, list] = {}
            for pi in chosen[k]:
                arcs, edges, _, _, _ = info[k][pi]
                for a, e in zip(arcs, edges):
                    if e.purification_effect > 0:
                        ent = x_on.setdefault(e.id, [0, a, e])
                        ent[0] += 1
            its = sorted(x_on.values(), key=lambda t: (-t[2].purification_effect, t[2].id))
            deficits.append(d)
            items.append((k, its))
        if not deficits:
            return {}
        left = {eid: edge_cap[eid] - use_e[eid] for eid in edge_cap}
        plan: dict[tuple[int, int], int] = {}

        def place(qi: int) -> bool:
            if qi == len(items):
                return True
            k, its = items[qi]
            return fill(qi, k, its, 0, deficits[qi])

        def fill(qi: int, k: int, its: list, i: int, need: float) -> bool:
            if need <= 1e-12:
                return place(qi + 1)
            if i == len(its):
                return False
            potential = sum(
                min(x * e.purification_count, left[e.id]) * e.purification_effect for x, _, e in its[i:]
            )
            if potential < need - 1e-12:
                return False
            x, a, e = its[i]
            hi = min(x * e.purification_count, left[e.id])
            for c in range(hi, -1, -1):
                left[e.id] -= c
                if c:
                    plan[(k, a)] = c
                if fill(qi, k, its, i + 1, need - c * e.purification_effect):
                    return True
                left[e.id] += c
                plan.pop((k, a), None)
            return False

        return plan if place(0) else None

    def leaf(total: int) -> None:
        plan = purification_plan()
        if plan is None:
            return
        vals = assemble(plan)
        if check_solution(inst, vals).feasible:
            best["obj"] = total
            best["values"] = vals

    def choose(k: int, total: int) -> bool:
        """Return True once the global upper bound is reached."""
        if k == K:
            if total > best["obj"]:
                leaf(total)
            return best["obj"] == total_m
        m = inst.requests[k].message_size
        for y in range(m, -1, -1):
            if total + y + remaining_m[k] <= best["obj"]:
                break
            if pick(k, y, 0, total + y):
                return True
        return False

    def pick(k: int, left: int, start: int, total: int) -> bool:
        if left == 0:
            n = len(chosen[k])
            floor = sum(info[k][pi][4] for pi in chosen[k])
            if floor > nth * n + 1e-12:
                return False
            return choose(k + 1, total)
        for pi in range(start, len(info[k])):
            arcs, edges, reps, _, _ = info[k][pi]
            if any(use_e[e.id] >= edge_cap[e.id] for e in edges):
                continue
            if any(use_r[r] >= node_cap[r] for r in reps):
                continue
            for e in edges:
                use_e[e.id] += 1
            for r in reps:
                use_r[r] += 1
            chosen[k].append(pi)
            done = pick(k, left - 1, pi, total)
            chosen[k].pop()
            for e in edges:
                use_e[e.id] -= 1
            for r in reps:
                use_r[r] -= 1
            if done:
                return True
        return False

    choose(0, 0)
    if best["values"] is None:
        vals = np.zeros(inst.num_vars)
        return Solution(vals, 0.0, True, True)
    return Solution(best["values"], float(best["obj"]), True, True)


def _multiset_count(n_paths: int, m: int) -> int:
    """Multisets of at most ``m`` paths drawn from ``n_paths``."""
    if n_paths == 0:
        return 1
    return sum(math.comb(n_paths + y - 1, y) for y in range(m + 1))


def enumeration_space(inst: IlpInstance) -> int:
    space = 1
    for req in inst.requests:
        n = len(simple_paths(inst.graph, req.source, req.destination))
        space *= _multiset_count(n, req.message_size)
    return space


__all__ = [
    "Arc",
    "FeasibilityReport",
    "IlpInstance",
    "Request",
    "Row",
    "Solution",
    "VarKind",
    "VariableIndex",
    "brute_force_optimum",
    "build_ilp",
    "check_solution",
    "path_noise",
    "simple_paths",
    "to_lp_text",
]
