"""Scenario configuration: INI-style file with sections, defaults and a stable hash."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .netmodel import AffineFidelity, ConstellationConfig, UniformFidelity

SCENARIOS: dict[str, dict[str, tuple[int, int]]] = {
    "abundant": {"edge": (8, 16), "memory": (16, 32)},
    "sufficient": {"edge": (4, 8), "memory": (8, 16)},
    "insufficient": {"edge": (1, 3), "memory": (2, 6)},
}
SOLVERS = ("linear", "greedy")


@dataclass(frozen=True)
class NetworkConfig:
    stations: int = 50
    attachment_degree: int = 2
    switches: int = 10
    region: tuple[float, float, float, float] = (30.0, 50.0, -10.0, 30.0)
    ground_fidelity: tuple[float, float] = (0.75, 1.0)
    freespace_fidelity: tuple[float, float] = (0.9, 1.0)
    fidelity_mapping: str = "uniform"
    affine_eta_max: float = 0.05
    keep_sentinel_edges: bool = False
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)

    def mapping(self):
        lo, hi = self.freespace_fidelity
        if self.fidelity_mapping == "uniform":
            return UniformFidelity(lo, hi)
        if self.fidelity_mapping == "affine":
            return AffineFidelity(lo, hi, self.affine_eta_max)
        raise ConfigError(f"unknown fidelity mapping {self.fidelity_mapping!r}")


@dataclass(frozen=True)
class TrafficConfig:
    requests: int = 10
    message_size: tuple[int, int] = (1, 4)
    arrivals_per_round: int = 0


@dataclass(frozen=True)
class SimConfig:
    num_rounds: int = 8
    swap_success_prob: float = 0.95
    seed: int = 1
    solver: str = "linear"
    noise_threshold: float = 0.3
    scenario: str = "sufficient"
    round_dt_s: float | None = None  # None: orbital period / 32
    greedy_sort_by: str = "cost"
    pivot_rule: str = "bland"

    def __post_init__(self) -> None:
        if not 0.0 <= self.swap_success_prob <= 1.0:
            raise ConfigError("swap_success_prob must lie in [0, 1]")
        if self.num_rounds < 1:
            raise ConfigError("num_rounds must be >= 1")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {tuple(SCENARIOS)}")
        if self.greedy_sort_by not in ("cost", "noise"):
            raise ConfigError("greedy_sort_by must be 'cost' or 'noise'")
        if self.noise_threshold < 0:
            raise ConfigError("noise_threshold must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[str, ...] = ("sufficient",)
    solvers: tuple[str, ...] = ("linear", "greedy")
    seeds: tuple[int, ...] = (1,)
    noise_thresholds: tuple[float, ...] = (0.3,)
    workers: int = 1


@dataclass(frozen=True)
class Config:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ----------------------------------------------------------------------------
# parsing

_SECTIONS = {
    "network": {
        "stations": int,
        "attachment_degree": int,
        "switches": int,
        "region": "float4",
        "ground_fidelity": "float2",
        "freespace_fidelity": "float2",
        "fidelity_mapping": str,
        "affine_eta_max": float,
        "keep_sentinel_edges": bool,
    },
    "constellation": {
        "inclination_deg": float,
        "num_satellites": int,
        "num_planes": int,
        "phasing": int,
        "altitude_m": float,
        "elevation_threshold_deg": float,
    },
    "traffic": {"requests": int, "message_size": "int2", "arrivals_per_round": int},
    "simulation": {
        "num_rounds": int,
        "swap_success_prob": float,
        "seed": int,
        "solver": str,
        "noise_threshold": float,
        "scenario": str,
        "round_dt_s": "optfloat",
        "greedy_sort_by": str,
        "pivot_rule": str,
    },
    "experiment": {
        "scenarios": "strlist",
        "solvers": "strlist",
        "seeds": "seeds",
        "noise_thresholds": "floatlist",
        "workers": int,
    },
}


def _convert(kind, raw: str):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind in (int, float, str):
        return kind(raw)
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if kind == "optfloat":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if kind == "strlist":
        return tuple(items)
    if kind == "floatlist":
        return tuple(float(s) for s in items)
    if kind == "seeds":
        seeds: list[int] = []
        for s in items:
            if "-" in s[1:]:
                lo, hi = s.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(s))
        return tuple(seeds)
    want = int(kind[-1])
    conv = int if kind.startswith("int") else float
    if len(items) != want:
        raise ValueError(f"expected {want} comma-separated values")
    return tuple(conv(s) for s in items)


def parse_config(text: str, source: str = "<config>") -> Config:
    """Parse an INI config; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values: dict[str, dict] = {s: {} for s in _SECTIONS}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{source}: [{section}] unknown key {key!r}")
            try:
                values[section][key] = _convert(_SECTIONS[section][key], raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{section}] {key}: {exc}") from exc
    try:
        constellation = ConstellationConfig(**values["constellation"])
        network = NetworkConfig(**values["network"], constellation=constellation)
        traffic = TrafficConfig(**values["traffic"])
        sim = SimConfig(**values["simulation"])
        experiment = ExperimentConfig(**values["experiment"])
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    for s in experiment.scenarios:
        if s not in SCENARIOS:
            raise ConfigError(f"{source}: [experiment] unknown scenario {s!r}")
    for s in experiment.solvers:
        if s not in SOLVERS:
            raise ConfigError(f"{source}: [experiment] unknown solver {s!r}")
    network.mapping()
    return Config(network, traffic, sim, experiment)


def config_from_dict(d: dict) -> Config:
    """Inverse of ``Config.to_dict``, used to replay a run from its manifest."""

    def tuples(section: dict) -> dict:
        return {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}

    try:
        net = tuples(d["network"])
        constellation = ConstellationConfig(**net.pop("constellation"))
        return Config(
            NetworkConfig(**net, constellation=constellation),
            TrafficConfig(**tuples(d["traffic"])),
            SimConfig(**tuples(d["sim"])),
            ExperimentConfig(**tuples(d["experiment"])),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config record: {exc}") from exc


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


_COMMENTS = {
    ("network", "region"): "lat_min, lat_max, lon_min, lon_max in degrees",
    ("network", "fidelity_mapping"): "uniform | affine",
    ("network", "switches"): "highest-degree stations become switches",
    ("constellation", "elevation_threshold_deg"): "links below this elevation are unusable",
    ("traffic", "requests"): "requests arriving at round 0",
    ("traffic", "message_size"): "inclusive range of qubits per request",
    ("simulation", "scenario"): "abundant | sufficient | insufficient",
    ("simulation", "round_dt_s"): "auto = orbital period / 32",
    ("simulation", "solver"): "linear | greedy",
    ("simulation", "pivot_rule"): "bland | dantzig",
    ("experiment", "seeds"): "list and ranges, e.g. 1-20",
}


def format_config(cfg: Config) -> str:
    """Render ``cfg`` as a config file that parses back to the same values."""
    blocks = {
        "network": {k: v for k, v in dataclasses.asdict(cfg.network).items() if k != "constellation"},
        "constellation": {
            k: v for k, v in dataclasses.asdict(cfg.network.constellation).items() if k != "earth_radius_m"
        },
        "traffic": dataclasses.asdict(cfg.traffic),
        "simulation": dataclasses.asdict(cfg.sim),
        "experiment": dataclasses.asdict(cfg.experiment),
    }
    out = []
    for section, kv in blocks.items():
        out.append(f"[{section}]")
        for k, v in kv.items():
            note = _COMMENTS.get((section, k))
            line = f"{k} = {_fmt(v)}"
            out.append(f"{line}  ; {note}" if note else line)
        out.append("")
    return "\n".join(out)


def default_config_text() -> str:
    return format_config(Config())
