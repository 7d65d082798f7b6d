"""Network model: ground topology, Walker Delta constellation, visibility and routing-graph snapshots."""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Protocol, Union

import networkx as nx
import numpy as np

from . import physics
from .errors import ConfigError, Unreachable
from .rng import int_seed, substream

EARTH_RADIUS_M = 6_371_000.0
EARTH_MU = 3.986004418e14  # m^3 / s^2
SENTINEL_FIDELITY = 0.001


class Role(str, enum.Enum):
    USER = "user"
    SWITCH = "switch"
    SATELLITE = "satellite"


class EdgeKind(str, enum.Enum):
    GROUND = "ground"
    FREE_SPACE = "freespace"


@dataclass(frozen=True)
class GroundStation:
    id: str
    latitude_deg: float
    longitude_deg: float
    role: Role
    memory_capacity: int = 0
    noise_amendment: float = 0.0

    def __post_init__(self) -> None:
        if self.role not in (Role.USER, Role.SWITCH):
            raise ConfigError(f"ground station {self.id} must be a user or switch")
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ConfigError(f"latitude out of range for {self.id}")
        if not -180.0 <= self.longitude_deg < 180.0:
            raise ConfigError(f"longitude out of range for {self.id}")
        if self.memory_capacity < 0 or self.noise_amendment < 0:
            raise ConfigError(f"negative capacity or noise amendment on {self.id}")

    @property
    def is_repeater(self) -> bool:
        return self.role is Role.SWITCH

    def position(self, radius_m: float = EARTH_RADIUS_M) -> np.ndarray:
        lat = math.radians(self.latitude_deg)
        lon = math.radians(self.longitude_deg)
        return radius_m * np.array(
            [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
        )


@dataclass(frozen=True)
class ConstellationConfig:
    """Walker Delta ``inclination:num_satellites/num_planes/phasing``."""

    inclination_deg: float = 53.0
    num_satellites: int = 40
    num_planes: int = 5
    phasing: int = 1
    altitude_m: float = 550_000.0
    elevation_threshold_deg: float = 20.0
    earth_radius_m: float = EARTH_RADIUS_M

    def __post_init__(self) -> None:
        if self.num_satellites < 1 or self.num_planes < 1:
            raise ConfigError("constellation needs at least one satellite and one plane")
        if self.num_satellites % self.num_planes:
            raise ConfigError("num_planes must divide num_satellites")
        if not 0 <= self.phasing < self.num_planes:
            raise ConfigError("phasing must lie in [0, num_planes)")
        if self.altitude_m <= 0:
            raise ConfigError("altitude must be positive")

    @property
    def per_plane(self) -> int:
        return self.num_satellites // self.num_planes

    @property
    def orbit_radius_m(self) -> float:
        return self.earth_radius_m + self.altitude_m

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.orbit_radius_m**3 / EARTH_MU)


@dataclass(frozen=True)
class Satellite:
    id: str
    plane_index: int
    slot_index: int
    memory_capacity: int = 0
    noise_amendment: float = 0.0

    role = Role.SATELLITE
    is_repeater = True


Node = Union[GroundStation, Satellite]


def satellite_id(plane: int, slot: int) -> str:
    return f"sat{plane:02d}-{slot:02d}"


def build_constellation(
    cfg: ConstellationConfig,
    memory_capacities: Sequence[int] | None = None,
    noise_amendment: float = 0.0,
) -> list[Satellite]:
    sats = []
    for plane in range(cfg.num_planes):
        for slot in range(cfg.per_plane):
            i = plane * cfg.per_plane + slot
            cap = 0 if memory_capacities is None else int(memory_capacities[i])
            sats.append(Satellite(satellite_id(plane, slot), plane, slot, cap, noise_amendment))
    return sats


def satellite_position(cfg: ConstellationConfig, sat: Satellite, t: float) -> np.ndarray:
    """Earth-centered position of ``sat`` at time ``t`` (seconds) on its circular orbit.

    The frame does not rotate with the Earth, so ground stations are fixed in it.
    """
    if not (0 <= sat.plane_index < cfg.num_planes and 0 <= sat.slot_index < cfg.per_plane):
        raise ConfigError(f"satellite {sat.id} indices outside constellation")
    raan = 2.0 * math.pi * sat.plane_index / cfg.num_planes
    u = (
        2.0 * math.pi * sat.slot_index / cfg.per_plane
        + 2.0 * math.pi * cfg.phasing * sat.plane_index / cfg.num_satellites
        + 2.0 * math.pi * (t % cfg.period_s) / cfg.period_s
    )
    inc = math.radians(cfg.inclination_deg)
    r = cfg.orbit_radius_m
    cu, su = math.cos(u), math.sin(u)
    co, so = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    return r * np.array([co * cu - so * su * ci, so * cu + co * su * ci, su * si])


def elevation_angle(sat_pos: np.ndarray, station: GroundStation, radius_m: float = EARTH_RADIUS_M) -> float:
    """Elevation (degrees) of ``sat_pos`` above the local horizon at ``station``."""
    g = station.position(radius_m)
    v = np.asarray(sat_pos, dtype=float) - g
    dist = float(np.linalg.norm(v))
    up = g / radius_m
    s = max(-1.0, min(1.0, float(v @ up) / dist))
    return math.degrees(math.asin(s))


# ----------------------------------------------------------------------------
# edges and routing graph


@dataclass(frozen=True)
class Edge:
    id: str
    endpoints: tuple[str, str]
    kind: EdgeKind
    capacity: int
    fidelity: float
    noise: float
    purification_effect: float
    purification_count: int

    def other(self, node: str) -> str:
        a, b = self.endpoints
        return b if node == a else a


def make_edge(u: str, v: str, kind: EdgeKind, capacity: int, fidelity: float) -> Edge:
    """Build an edge whose noise and purification fields follow from ``fidelity``."""
    if capacity < 0:
        raise ConfigError(f"negative capacity on edge {u}-{v}")
    if not 0.0 < fidelity <= 1.0:
        raise ConfigError(f"fidelity {fidelity!r} outside (0, 1] on edge {u}-{v}")
    a, b = sorted((u, v))
    mu = physics.noise_of(fidelity)
    kappa, p = 0, 0.0
    if kind is EdgeKind.GROUND:
        try:
            kappa = physics.purification_count(fidelity)
        except Unreachable:
            kappa = 0
        if kappa >= 1:
            p = physics.purification_effect(mu, kappa)
    return Edge(f"{a}~{b}", (a, b), kind, int(capacity), float(fidelity), mu, p, kappa)


@dataclass(frozen=True)
class RoutingGraph:
    timestamp_s: float
    nodes: dict[str, Node]
    edges: tuple[Edge, ...]
    _adj: dict[str, tuple[tuple[str, Edge], ...]] = field(init=False, repr=False, compare=False)
    _by_pair: dict[tuple[str, str], Edge] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        edges = tuple(sorted(self.edges, key=lambda e: e.id))
        object.__setattr__(self, "edges", edges)
        adj: dict[str, list[tuple[str, Edge]]] = {n: [] for n in self.nodes}
        by_pair = {}
        for e in edges:
            a, b = e.endpoints
            if a not in self.nodes or b not in self.nodes:
                raise ConfigError(f"edge {e.id} references an unknown node")
            if e.endpoints in by_pair:
                raise ConfigError(f"duplicate edge {e.id}")
            na, nb = self.nodes[a], self.nodes[b]
            sats = isinstance(na, Satellite) + isinstance(nb, Satellite)
            if e.kind is EdgeKind.FREE_SPACE and (sats != 1 or e.purification_effect != 0):
                raise ConfigError(f"free-space edge {e.id} must join one satellite and one station")
            if e.kind is EdgeKind.GROUND and sats:
                raise ConfigError(f"ground edge {e.id} touches a satellite")
            by_pair[e.endpoints] = e
            adj[a].append((b, e))
            adj[b].append((a, e))
        object.__setattr__(self, "_adj", {n: tuple(sorted(v)) for n, v in adj.items()})
        object.__setattr__(self, "_by_pair", by_pair)

    @property
    def repeater_set(self) -> frozenset[str]:
        return frozenset(n for n, node in self.nodes.items() if node.is_repeater)

    def repeaters(self) -> list[str]:
        return sorted(self.repeater_set)

    def users(self) -> list[str]:
        return sorted(n for n, node in self.nodes.items() if node.role is Role.USER)

    def is_repeater(self, node: str) -> bool:
        return self.nodes[node].is_repeater

    def neighbors(self, node: str) -> tuple[tuple[str, Edge], ...]:
        return self._adj[node]

    def edge_between(self, u: str, v: str) -> Edge | None:
        return self._by_pair.get(tuple(sorted((u, v))))

    def subgraph(self, kind: EdgeKind | None) -> RoutingGraph:
        """Same node set, edges filtered to one kind (``None`` keeps all)."""
        if kind is None:
            return self
        return RoutingGraph(self.timestamp_s, self.nodes, tuple(e for e in self.edges if e.kind is kind))

    def is_connected(self) -> bool:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(e.endpoints for e in self.edges)
        return len(self.nodes) == 0 or nx.is_connected(g)

    def to_text(self) -> str:
        return dump_graph(self)

    def same_as(self, other: RoutingGraph) -> bool:
        return (
            self.timestamp_s == other.timestamp_s
            and self.nodes == other.nodes
            and self.edges == other.edges
        )


# ----------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GroundTopology:
    stations: tuple[GroundStation, ...]
    edges: tuple[Edge, ...]


def generate_ground_topology(
    num_stations: int,
    attachment_degree: int,
    num_switches: int,
    seed: int,
    *,
    fidelity_range: tuple[float, float] = (0.75, 1.0),
    edge_capacity_range: tuple[int, int] = (4, 8),
    memory_capacity_range: tuple[int, int] = (8, 16),
    switch_noise_amendment: float = 0.0,
    region: tuple[float, float, float, float] = (30.0, 50.0, -10.0, 30.0),
) -> GroundTopology:
    """Barabasi-Albert fiber topology with the best-connected stations promoted to switches.

    ``region`` is ``(lat_min, lat_max, lon_min, lon_max)`` in degrees; station
    positions are drawn uniformly in it. Capacity ranges are inclusive.
    """
    if num_stations < 2:
        raise ConfigError("need at least two stations")
    if attachment_degree < 1 or attachment_degree >= num_stations:
        raise ConfigError("attachment_degree must lie in [1, num_stations)")
    if not 0 <= num_switches < num_stations:
        raise ConfigError("num_switches must lie in [0, num_stations)")
    lo, hi = fidelity_range
    if not 0.0 < lo <= hi <= 1.0:
        raise ConfigError("fidelity range must satisfy 0 < lo <= hi <= 1")
    _check_int_range(edge_capacity_range, "edge_capacity_range")
    _check_int_range(memory_capacity_range, "memory_capacity_range")

    ba = nx.barabasi_albert_graph(num_stations, attachment_degree, seed=int_seed(substream(seed, "topology")))
    ranked = sorted(ba.nodes, key=lambda n: (-ba.degree[n], n))
    switches = set(ranked[:num_switches])

    width = len(str(num_stations - 1))
    names = {n: f"gs{n:0{width}d}" for n in ba.nodes}
    pos_rng = substream(seed, "positions")
    cap_rng = substream(seed, "capacities", "ground")
    fid_rng = substream(seed, "fidelities", "ground")

    lat_min, lat_max, lon_min, lon_max = region
    stations = []
    for n in sorted(ba.nodes):
        lat = float(pos_rng.uniform(lat_min, lat_max))
        lon = float(pos_rng.uniform(lon_min, lon_max))
        mem = int(cap_rng.integers(memory_capacity_range[0], memory_capacity_range[1] + 1))
        if n in switches:
            stations.append(GroundStation(names[n], lat, lon, Role.SWITCH, mem, switch_noise_amendment))
        else:
            stations.append(GroundStation(names[n], lat, lon, Role.USER, 0, 0.0))

    edges = []
    for a, b in sorted(tuple(sorted(e)) for e in ba.edges):
        cap = int(cap_rng.integers(edge_capacity_range[0], edge_capacity_range[1] + 1))
        fid = float(fid_rng.uniform(lo, hi))
        edges.append(make_edge(names[a], names[b], EdgeKind.GROUND, cap, fid))
    return GroundTopology(tuple(stations), tuple(sorted(edges, key=lambda e: e.id)))


def _check_int_range(r: tuple[int, int], name: str) -> None:
    if not 0 <= r[0] <= r[1]:
        raise ConfigError(f"{name} must satisfy 0 <= lo <= hi")


# ----------------------------------------------------------------------------
# free-space fidelity mappings


class FidelityMapping(Protocol):
    name: str

    def __call__(self, eta: float, rng: np.random.Generator) -> float: ...


@dataclass(frozen=True)
class UniformFidelity:
    """Fidelity drawn uniformly per link and round, independent of transmissivity."""

    low: float = 0.9
    high: float = 1.0
    name: str = "uniform"

    def __call__(self, eta: float, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class AffineFidelity:
    """Deterministic ``f_min + (f_max - f_min) * min(eta / eta_max, 1)``."""

    f_min: float = 0.9
    f_max: float = 1.0
    eta_max: float = 0.05
    name: str = "affine"

    def __call__(self, eta: float, rng: np.random.Generator) -> float:
        return self.f_min + (self.f_max - self.f_min) * min(eta / self.eta_max, 1.0)


@dataclass(frozen=True)
class Optics:
    """Telescope and atmosphere constants used for every downlink."""

    transmitter_diameter_m: float = 0.1
    receiver_diameter_m: float = 1.0
    wavelength_m: float = 810e-9
    extinction_coeff_per_m: float = 1e-5
    atmosphere_thickness_m: float = 20_000.0


def link_transmissivity(
    sat_pos: np.ndarray, station: GroundStation, optics: Optics, radius_m: float = EARTH_RADIUS_M
) -> float:
    g = station.position(radius_m)
    v = np.asarray(sat_pos, dtype=float) - g
    dist = float(np.linalg.norm(v))
    u = v / dist
    # path length from the station to the top of the atmosphere shell along u
    gu = float(g @ u)
    top = radius_m + optics.atmosphere_thickness_m
    depth = -gu + math.sqrt(max(gu * gu - float(g @ g) + top * top, 0.0))
    depth = min(max(depth, 1e-9), dist)
    params = physics.OpticalParams(
        optics.transmitter_diameter_m,
        optics.receiver_diameter_m,
        optics.wavelength_m,
        optics.extinction_coeff_per_m,
        dist,
        depth,
    )
    return physics.transmissivity(params)


def snapshot(
    cfg: ConstellationConfig,
    stations: Iterable[GroundStation],
    satellites: Iterable[Satellite],
    ground_edges: Iterable[Edge],
    t: float,
    mapping: FidelityMapping,
    rng: np.random.Generator,
    *,
    freespace_capacity_range: tuple[int, int] = (4, 8),
    keep_sentinel_edges: bool = False,
    optics: Optics = Optics(),
) -> RoutingGraph:
    """Routing graph at time ``t``.

    Every satellite/station pair above the elevation threshold gets a
    free-space edge with a mapped fidelity and a drawn capacity. Pairs below
    the threshold are dropped, or kept at the sentinel fidelity when
    ``keep_sentinel_edges`` is set.
    """
    stations = sorted(stations, key=lambda s: s.id)
    satellites = sorted(satellites, key=lambda s: s.id)
    nodes: dict[str, Node] = {s.id: s for s in stations}
    nodes.update((s.id, s) for s in satellites)
    edges = list(ground_edges)
    lo, hi = freespace_capacity_range
    for sat in satellites:
        pos = satellite_position(cfg, sat, t)
        for st in stations:
            if elevation_angle(pos, st, cfg.earth_radius_m) >= cfg.elevation_threshold_deg:
                fid = mapping(link_transmissivity(pos, st, optics, cfg.earth_radius_m), rng)
                if not 0.0 < fid <= 1.0:
                    raise ConfigError(f"fidelity mapping {mapping.name} produced {fid!r}")
            elif keep_sentinel_edges:
                fid = SENTINEL_FIDELITY
            else:
                continue
            cap = int(rng.integers(lo, hi + 1))
            edges.append(make_edge(sat.id, st.id, EdgeKind.FREE_SPACE, cap, fid))
    return RoutingGraph(float(t), nodes, tuple(edges))


# ----------------------------------------------------------------------------
# text dump


def dump_graph(g: RoutingGraph) -> str:
    lines = ["# sgiq routing graph v1", f"time {g.timestamp_s!r}"]
    for nid in sorted(g.nodes):
        n = g.nodes[nid]
        if isinstance(n, Satellite):
            lines.append(
                f"satellite {n.id} {n.plane_index} {n.slot_index} {n.memory_capacity} {n.noise_amendment!r}"
            )
        else:
            lines.append(
                f"station {n.id} {n.role.value} {n.latitude_deg!r} {n.longitude_deg!r} "
                f"{n.memory_capacity} {n.noise_amendment!r}"
            )
    for e in g.edges:
        a, b = e.endpoints
        lines.append(
            f"edge {a} {b} {e.kind.value} {e.capacity} {e.fidelity!r} {e.noise!r} "
            f"{e.purification_count} {e.purification_effect!r}"
        )
    return "\n".join(lines) + "\n"


def parse_nodes_and_edges(text: str, source: str = "<text>") -> tuple[float, list[Node], list[Edge]]:
    t = 0.0
    nodes: list[Node] = []
    edges: list[Edge] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "time":
                t = float(parts[1])
            elif parts[0] == "station":
                _, nid, role, lat, lon, cap, sigma = parts
                nodes.append(GroundStation(nid, float(lat), float(lon), Role(role), int(cap), float(sigma)))
            elif parts[0] == "satellite":
                _, nid, plane, slot, cap, sigma = parts
                nodes.append(Satellite(nid, int(plane), int(slot), int(cap), float(sigma)))
            elif parts[0] == "edge":
                a, b, kind, cap, fid = parts[1:6]
                edges.append(make_edge(a, b, EdgeKind(kind), int(cap), float(fid)))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
    return t, nodes, edges


def load_graph(text: str, source: str = "<text>") -> RoutingGraph:
    t, nodes, edges = parse_nodes_and_edges(text, source)
    return RoutingGraph(t, {n.id: n for n in nodes}, tuple(edges))


def dump_topology(stations: Iterable[GroundStation], ground_edges: Iterable[Edge]) -> str:
    g = RoutingGraph(0.0, {s.id: s for s in stations}, tuple(ground_edges))
    body = dump_graph(g).splitlines()[2:]
    return "\n".join(["# sgiq ground topology v1", *body]) + "\n"


def dump_constellation(cfg: ConstellationConfig, satellites: Iterable[Satellite]) -> str:
    lines = [
        "# sgiq constellation v1",
        f"walker {cfg.inclination_deg!r} {cfg.num_satellites} {cfg.num_planes} {cfg.phasing} "
        f"{cfg.altitude_m!r} {cfg.elevation_threshold_deg!r} {cfg.earth_radius_m!r}",
    ]
    for s in sorted(satellites, key=lambda s: s.id):
        lines.append(f"satellite {s.id} {s.plane_index} {s.slot_index} {s.memory_capacity} {s.noise_amendment!r}")
    return "\n".join(lines) + "\n"


def load_constellation(text: str, source: str = "<text>") -> tuple[ConstellationConfig, list[Satellite]]:
    cfg = None
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if parts and parts[0] == "walker":
            try:
                inc, n, p, f, alt, thr, radius = parts[1:]
                cfg = ConstellationConfig(float(inc), int(n), int(p), int(f), float(alt), float(thr), float(radius))
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from exc
        else:
            body.append(raw)
    if cfg is None:
        raise ConfigError(f"{source}: missing walker record")
    _, nodes, _ = parse_nodes_and_edges("\n".join(body), source)
    sats = [n for n in nodes if isinstance(n, Satellite)]
    return cfg, sats
