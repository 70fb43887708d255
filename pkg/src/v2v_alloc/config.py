"""Campaign configuration: a flat YAML document plus cluster and QoS lists.

Example (the shipped ``configs/reference.yaml`` follows this layout)::

    N: 40
    clusters:               # one entry per cluster; ids or "a-b" ranges
      - "1-16"
      - "1-8, 17-24"
    qos_mbps:               # list of N values, or a mapping of ids/ranges
      "1-8": 12
      "9-40": 6
    epsilon_mbps: 1.6
    K: 3
    L: 16
    bandwidth_hz: 1.26e6
    sinr_min_db: 0
    sinr_max_db: 20
    trials: 1000
    base_seed: 0
    solvers: both           # exact | mikp | both, or a list
    time_limit_s: 60
    node_limit: 0
    resolution_kbps: 10
    workers: 1
    output: null
    format: csv

Every error is reported as ``ConfigInvalid`` carrying the 1-based line of the
offending entry.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .channel import ChannelModelParams
from .errors import ConfigInvalid, GridError, ScenarioError
from .scenario import DEFAULT_BANDWIDTH_HZ, ChannelGrid, Scenario, validate_scenario

SOLVER_NAMES = ("exact", "mikp")
FORMATS = ("csv", "json")
REQUIRED = ("N", "clusters", "qos_mbps", "epsilon_mbps", "K", "L")
DEFAULTS = {
    "bandwidth_hz": DEFAULT_BANDWIDTH_HZ,
    "sinr_min_db": 0.0,
    "sinr_max_db": 20.0,
    "distribution": "uniform_db",
    "trials": 1000,
    "base_seed": 0,
    "solvers": "both",
    "time_limit_s": 60.0,
    "node_limit": 0,
    "resolution_kbps": 10.0,
    "workers": 1,
    "output": None,
    "format": "csv",
}
KNOWN_KEYS = set(REQUIRED) | set(DEFAULTS)


@dataclass(frozen=True)
class CampaignConfig:
    scenario: Scenario
    grid: ChannelGrid
    channel: ChannelModelParams
    trials: int = 1000
    base_seed: int = 0
    solvers: tuple[str, ...] = SOLVER_NAMES
    time_limit: float = 60.0
    node_limit: int = 0
    resolution: float = 10e3
    workers: int = 1
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigInvalid(f"trials must be >= 1, got {self.trials}")
        if not self.solvers or any(sv not in SOLVER_NAMES for sv in self.solvers):
            raise ConfigInvalid(f"solvers must be a nonempty subset of {SOLVER_NAMES}, got {self.solvers}")
        if self.time_limit < 0 or self.node_limit < 0:
            raise ConfigInvalid("time limit and node limit must be nonnegative")
        if not self.resolution > 0:
            raise ConfigInvalid(f"resolution must be > 0, got {self.resolution}")
        if self.workers < 1:
            raise ConfigInvalid(f"workers must be >= 1, got {self.workers}")
        if self.format not in FORMATS:
            raise ConfigInvalid(f"format must be one of {FORMATS}, got {self.format!r}")

    def summary(self) -> dict:
        """Plain-data description embedded in reports (paths and workers omitted)."""
        s, g, p = self.scenario, self.grid, self.channel
        return {
            "N": s.N,
            "clusters": [list(c) for c in s.clusters],
            "qos_mbps": [q / 1e6 for q in s.qos],
            "epsilon_mbps": s.epsilon / 1e6,
            "K": g.K,
            "L": g.L,
            "bandwidth_hz": g.B,
            "sinr_min_db": p.sinr_min_db,
            "sinr_max_db": p.sinr_max_db,
            "distribution": p.distribution,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "solvers": list(self.solvers),
            "time_limit_s": self.time_limit,
            "node_limit": self.node_limit,
            "resolution_kbps": self.resolution / 1e3,
        }

    def with_epsilon(self, epsilon_bps: float) -> "CampaignConfig":
        s = self.scenario
        raw = {"N": s.N, "clusters": s.clusters, "qos": s.qos, "epsilon": epsilon_bps}
        try:
            scenario = validate_scenario(raw)
        except ScenarioError as exc:
            raise ConfigInvalid(str(exc)) from None
        return dataclasses.replace(self, scenario=scenario)


def parse_ids(spec, line: int | None = None, source: str | None = None) -> list[int]:
    """Expand ``5``, ``"3-7"`` or ``"1-4, 9"`` (or a list of those) into ids."""
    if isinstance(spec, bool):
        raise ConfigInvalid(f"invalid vehicle id {spec!r}", line, source)
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        out: list[int] = []
        for item in spec:
            out.extend(parse_ids(item, line, source))
        return out
    if isinstance(spec, str):
        out = []
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                if "-" in part:
                    a, b = (int(t) for t in part.split("-", 1))
                    if b < a:
                        raise ConfigInvalid(f"empty id range {part!r}", line, source)
                    out.extend(range(a, b + 1))
                else:
                    out.append(int(part))
            except ValueError:
                raise ConfigInvalid(f"invalid vehicle id or range {part!r}", line, source) from None
        return out
    raise ConfigInvalid(f"invalid vehicle id specification {spec!r}", line, source)


def _line(node) -> int:
    return node.start_mark.line + 1


def _scalar(node):
    """Construct the Python value of a composed node."""
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def _number(node, key, source, kind=float):
    value = _scalar(node)
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms such as 1.26e6 as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(f"{key} must be a number, got {value!r}", _line(node), source)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigInvalid(f"{key} must be an integer, got {value!r}", _line(node), source)
        return int(value)
    return float(value)


def parse_config(text: str, source: str | None = None) -> CampaignConfig:
    """Parse and validate a campaign config document."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigInvalid(f"malformed YAML: {getattr(exc, 'problem', exc)}", line, source) from None
    if root is None or not isinstance(root, yaml.MappingNode):
        raise ConfigInvalid("config must be a mapping of keys to values", 1, source)

    nodes = {}
    for key_node, value_node in root.value:
        key = key_node.value
        if key in nodes:
            raise ConfigInvalid(f"duplicate key {key!r}", _line(key_node), source)
        if key not in KNOWN_KEYS:
            raise ConfigInvalid(f"unknown key {key!r}", _line(key_node), source)
        nodes[key] = value_node
    for key in REQUIRED:
        if key not in nodes:
            raise ConfigInvalid(f"missing required key {key!r}", None, source)

    N = _number(nodes["N"], "N", source, int)

    cl_node = nodes["clusters"]
    if not isinstance(cl_node, yaml.SequenceNode) or not cl_node.value:
        raise ConfigInvalid("clusters must be a nonempty list", _line(cl_node), source)
    clusters = []
    cluster_lines = []
    for item in cl_node.value:
        clusters.append(parse_ids(_scalar(item), _line(item), source))
        cluster_lines.append(_line(item))

    q_node = nodes["qos_mbps"]
    if isinstance(q_node, yaml.SequenceNode):
        qos = [_number(item, "qos_mbps entry", source) * 1e6 for item in q_node.value]
        qos_lines = [_line(item) for item in q_node.value]
    elif isinstance(q_node, yaml.MappingNode):
        qos_map, qos_line_of = {}, {}
        for k_node, v_node in q_node.value:
            value = _number(v_node, "qos_mbps value", source) * 1e6
            for v in parse_ids(_scalar(k_node), _line(k_node), source):
                if v in qos_map:
                    raise ConfigInvalid(f"qos for vehicle {v} given twice", _line(k_node), source)
                qos_map[v] = value
                qos_line_of[v] = _line(k_node)
        qos = qos_map
        qos_lines = qos_line_of
    else:
        raise ConfigInvalid("qos_mbps must be a list or a mapping", _line(q_node), source)

    epsilon = _number(nodes["epsilon_mbps"], "epsilon_mbps", source) * 1e6
    try:
        scenario = validate_scenario({"N": N, "clusters": clusters, "qos": qos, "epsilon": epsilon})
    except ScenarioError as exc:
        raise ConfigInvalid(str(exc), _scenario_error_line(exc, nodes, cluster_lines, qos_lines), source) from None

    def get(key, kind=float):
        if key not in nodes:
            return DEFAULTS[key]
        return _number(nodes[key], key, source, kind)

    try:
        grid = ChannelGrid(L=_number(nodes["L"], "L", source, int), K=_number(nodes["K"], "K", source, int),
                           B=get("bandwidth_hz"))
    except GridError as exc:
        key = {"L": "L", "B": "bandwidth_hz"}.get(str(exc)[:1], "K")
        node = nodes.get(key, nodes["K"])
        raise ConfigInvalid(str(exc), _line(node), source) from None

    distribution = _scalar(nodes["distribution"]) if "distribution" in nodes else DEFAULTS["distribution"]
    try:
        channel = ChannelModelParams(get("sinr_min_db"), get("sinr_max_db"), distribution, 0)
    except ValueError as exc:
        key = "distribution" if "distribution" in str(exc) else "sinr_max_db"
        raise ConfigInvalid(str(exc), _line(nodes[key]) if key in nodes else None, source) from None

    solvers = _parse_solvers(nodes.get("solvers"), source)
    fmt = _scalar(nodes["format"]) if "format" in nodes else DEFAULTS["format"]
    output = _scalar(nodes["output"]) if "output" in nodes else None
    if output is not None and not isinstance(output, str):
        raise ConfigInvalid("output must be a path string or null", _line(nodes["output"]), source)

    values = dict(
        trials=get("trials", int), base_seed=get("base_seed", int), solvers=solvers,
        time_limit=get("time_limit_s"), node_limit=get("node_limit", int),
        resolution=get("resolution_kbps") * 1e3, workers=get("workers", int),
        output=output, format=fmt,
    )
    try:
        return CampaignConfig(scenario=scenario, grid=grid, channel=channel, **values)
    except ConfigInvalid as exc:
        key = _campaign_key(str(exc))
        line = _line(nodes[key]) if key in nodes else None
        raise ConfigInvalid(exc.args[0], line, source) from None


def _parse_solvers(node, source) -> tuple[str, ...]:
    if node is None:
        return SOLVER_NAMES
    value = _scalar(node)
    names = parse_solver_names(value, _line(node), source)
    return names


def parse_solver_names(value, line=None, source=None) -> tuple[str, ...]:
    if value == "both":
        return SOLVER_NAMES
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigInvalid(f"solvers must be exact, mikp, both or a list, got {value!r}", line, source)
    bad = [v for v in value if v not in SOLVER_NAMES]
    if bad:
        raise ConfigInvalid(f"unknown solver {bad[0]!r}", line, source)
    return tuple(name for name in SOLVER_NAMES if name in value)


def _campaign_key(message: str) -> str:
    for key in ("trials", "solvers", "resolution", "workers", "format"):
        if message.startswith(key):
            return key if key != "resolution" else "resolution_kbps"
    return "time_limit_s"


def _scenario_error_line(exc, nodes, cluster_lines, qos_lines) -> int | None:
    text = str(exc)
    if text.startswith("cluster "):
        try:
            j = int(text.split()[1])
            return cluster_lines[j - 1]
        except (ValueError, IndexError):
            pass
    if text.startswith("vehicle ") and "qos" in text:
        v = int(text.split()[1])
        if isinstance(qos_lines, dict):
            return qos_lines.get(v)
        return qos_lines[v - 1] if v - 1 < len(qos_lines) else None
    if text.startswith("vehicle ") and "no cluster" in text:
        return _line(nodes["clusters"])
    if "qos" in text:
        return _line(nodes["qos_mbps"])
    if "epsilon" in text:
        return _line(nodes["epsilon_mbps"])
    if text.startswith("N "):
        return _line(nodes["N"])
    return None


def load_config(path) -> CampaignConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, source=str(path))


def default_config_text() -> str:
    return resources.files("v2v_alloc").joinpath("configs/reference.yaml").read_text()


def default_config() -> CampaignConfig:
    """The shipped N=40, J=4, K=3, L=16 campaign."""
    return parse_config(default_config_text(), source="reference.yaml")
