"""Scenario configuration: flat dotted-key text files.

One `key = value` per line, `#` comments. Every key has a default, printable
via the `print-config` command; unknown keys and out-of-range values raise
ConfigError naming the offending field. Client rosters use a compact syntax:

    clients.roster = benign:14,sign_flip(3.0):6

i.e. comma-separated `behavior[(param)]:count` groups, assigned to ascending
client ids in roster order.
"""

import copy
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from trustloop.controller import CONTROLLER_KINDS, ControllerParams
from trustloop.errors import ConfigError
from trustloop.federation import Behavior, ClientProfile, TrainConfig
from trustloop.signals import SignalConfig
from trustloop.task import TaskConfig

SCHEMA_VERSION = 1

_ROSTER_ITEM = re.compile(r"^([a-z_]+)(?:\(([^)]*)\))?:(\d+)$")


@dataclass
class SuiteConfig:
    controllers: list[str] = field(default_factory=lambda: ["atcl", "fixed", "adaptive", "none"])
    intensities: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.3, 0.5])
    attack: str = "sign_flip(3.0)"

    def validate(self) -> None:
        for kind in self.controllers:
            if kind not in CONTROLLER_KINDS:
                raise ConfigError("suite.controllers", f"unknown controller {kind!r}")
        for x in self.intensities:
            if not 0.0 <= x < 1.0:
                raise ConfigError("suite.intensities", "each intensity must be in [0, 1)")
        parse_roster(f"{self.attack}:1")  # syntax check; must be a single behavior


@dataclass
class ScenarioConfig:
    name: str = "custom"
    task: TaskConfig = field(default_factory=TaskConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    signals: SignalConfig = field(default_factory=SignalConfig)
    controller_params: ControllerParams = field(default_factory=ControllerParams)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    clients_count: int = 20
    roster: str = "benign:20"
    rounds: int = 100
    controller: str = "atcl"
    trust_init: float = 0.5
    skip_excluded_uploads: bool = False
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
    out_dir: str = "runs"

    def validate(self) -> None:
        self.task.validate()
        self.train.validate()
        self.controller_params.validate()
        self.suite.validate()
        if self.rounds < 1:
            raise ConfigError("rounds", "must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds", "must list at least one seed")
        if self.controller not in CONTROLLER_KINDS:
            raise ConfigError("controller", f"unknown controller {self.controller!r}")
        if not 0.0 <= self.trust_init <= 1.0:
            raise ConfigError("trust.t_init", "must be in [0, 1]")
        if not 0.0 <= self.signals.participation_init <= 1.0:
            raise ConfigError("signals.participation_init", "must be in [0, 1]")
        if self.signals.volatility_window < 2:
            raise ConfigError("signals.window_volatility", "must be >= 2")
        if self.signals.loss_window < 2:
            raise ConfigError("signals.window_loss", "must be >= 2")
        if not 0.0 < self.signals.participation_beta < 1.0:
            raise ConfigError("signals.beta_participation", "must be in (0, 1)")
        profiles = self.client_profiles()
        if len(profiles) != self.clients_count:
            raise ConfigError(
                "clients.roster",
                f"roster counts sum to {len(profiles)}, expected clients.count={self.clients_count}",
            )

    def client_profiles(self) -> list[ClientProfile]:
        return parse_roster(self.roster)


def parse_roster(text: str) -> list[ClientProfile]:
    profiles: list[ClientProfile] = []
    next_id = 0
    for item in [part.strip() for part in text.split(",") if part.strip()]:
        m = _ROSTER_ITEM.match(item)
        if not m:
            raise ConfigError("clients.roster", f"cannot parse roster item {item!r}")
        kind, param_text, count = m.group(1), m.group(2), int(m.group(3))
        param = None
        if param_text is not None:
            try:
                param = float(param_text)
            except ValueError:
                raise ConfigError("clients.roster", f"bad parameter in {item!r}") from None
        behavior = Behavior(kind=kind, param=param)
        for _ in range(count):
            profiles.append(ClientProfile(client_id=next_id, behavior=behavior))
            next_id += 1
    if not profiles:
        raise ConfigError("clients.roster", "roster is empty")
    return profiles


# Flat key registry: key -> (section attribute path, type). Types: int, float,
# bool, str, list[int], list[float], list[str].
_KEYS: dict[str, tuple[tuple[str, ...], str]] = {
    "scenario": (("name",), "str"),
    "task.feature_dim": (("task", "feature_dim"), "int"),
    "task.num_classes": (("task", "num_classes"), "int"),
    "task.samples_per_client": (("task", "samples_per_client"), "int"),
    "task.noise_std": (("task", "noise_std"), "float"),
    "task.center_scale": (("task", "center_scale"), "float"),
    "task.dirichlet_concentration": (("task", "dirichlet_concentration"), "float"),
    "task.holdout_samples": (("task", "holdout_samples"), "int"),
    "clients.count": (("clients_count",), "int"),
    "clients.roster": (("roster",), "str"),
    "train.epochs": (("train", "epochs"), "int"),
    "train.lr": (("train", "lr"), "float"),
    "train.batch_size": (("train", "batch_size"), "int"),
    "rounds": (("rounds",), "int"),
    "controller": (("controller",), "str"),
    "controller.theta_init": (("controller_params", "theta_init"), "float"),
    "controller.theta_min": (("controller_params", "theta_min"), "float"),
    "controller.theta_max": (("controller_params", "theta_max"), "float"),
    "controller.delta_theta": (("controller_params", "delta_theta"), "float"),
    "controller.margin": (("controller_params", "margin"), "float"),
    "controller.alpha_init": (("controller_params", "alpha_init"), "float"),
    "controller.alpha_min": (("controller_params", "alpha_min"), "float"),
    "controller.alpha_max": (("controller_params", "alpha_max"), "float"),
    "controller.gamma_up": (("controller_params", "gamma_up"), "float"),
    "controller.eps_loss": (("controller_params", "eps_loss"), "float"),
    "controller.k_degraded": (("controller_params", "k_degraded"), "int"),
    "controller.k_stabilising": (("controller_params", "k_stabilising"), "int"),
    "controller.h_normal": (("controller_params", "h_normal"), "int"),
    "controller.sigma_min": (("controller_params", "sigma_min"), "float"),
    "controller.v_max": (("controller_params", "v_max"), "float"),
    "controller.rho": (("controller_params", "rho"), "float"),
    "controller.r_probe": (("controller_params", "r_probe"), "int"),
    "signals.window_volatility": (("signals", "volatility_window"), "int"),
    "signals.window_loss": (("signals", "loss_window"), "int"),
    "signals.beta_participation": (("signals", "participation_beta"), "float"),
    "signals.participation_init": (("signals", "participation_init"), "float"),
    "trust.t_init": (("trust_init",), "float"),
    "aggregation.skip_excluded_uploads": (("skip_excluded_uploads",), "bool"),
    "suite.controllers": (("suite", "controllers"), "list[str]"),
    "suite.intensities": (("suite", "intensities"), "list[float]"),
    "suite.attack": (("suite", "attack"), "str"),
    "seeds": (("seeds",), "list[int]"),
    "out_dir": (("out_dir",), "str"),
}


def _parse_value(key: str, text: str, type_name: str):
    text = text.strip()
    try:
        if type_name == "int":
            return int(text)
        if type_name == "float":
            return float(text)
        if type_name == "bool":
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if type_name == "str":
            return text
        items = [t.strip() for t in text.split(",") if t.strip()]
        if type_name == "list[int]":
            return [int(t) for t in items]
        if type_name == "list[float]":
            return [float(t) for t in items]
        if type_name == "list[str]":
            return items
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {type_name}") from None
    raise ConfigError(key, f"unhandled type {type_name}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _get(config: ScenarioConfig, path: tuple[str, ...]):
    obj = config
    for attr in path:
        obj = getattr(obj, attr)
    return obj


def _set(config: ScenarioConfig, path: tuple[str, ...], value) -> None:
    obj = config
    for attr in path[:-1]:
        obj = getattr(obj, attr)
    setattr(obj, path[-1], value)


def parse_config_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    config = base or ScenarioConfig()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw_line!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        if key == "schema_version":
            if _parse_value(key, value_text, "int") != SCHEMA_VERSION:
                raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}")
            continue
        if key not in _KEYS:
            raise ConfigError(key, "unknown configuration key")
        path, type_name = _KEYS[key]
        _set(config, path, _parse_value(key, value_text, type_name))
    config.validate()
    return config


def load_config(source: str | Path) -> ScenarioConfig:
    """Load from a file path or a built-in scenario name (e.g. 's_poison')."""
    path = Path(source)
    if path.exists():
        return parse_config_text(path.read_text())
    name = str(source)
    packaged = resources.files("trustloop").joinpath(f"configs/{name}.cfg")
    if packaged.is_file():
        return parse_config_text(packaged.read_text())
    raise ConfigError("config", f"no such file or built-in scenario: {source}")


def builtin_scenarios() -> list[str]:
    root = resources.files("trustloop").joinpath("configs")
    return sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg"))


def format_config(config: ScenarioConfig | None = None) -> str:
    config = config or ScenarioConfig()
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for key, (path, _) in _KEYS.items():
        lines.append(f"{key} = {_format_value(_get(config, path))}")
    return "\n".join(lines) + "\n"


def apply_attack(config: ScenarioConfig, intensity: float) -> ScenarioConfig:
    """Derive a config whose roster has `intensity` adversarial clients,
    using the suite's attack behavior; the rest stay benign."""
    derived = copy.deepcopy(config)
    n = config.clients_count
    n_adv = int(round(intensity * n))
    if n_adv == 0:
        derived.roster = f"benign:{n}"
    else:
        derived.roster = f"benign:{n - n_adv},{config.suite.attack}:{n_adv}"
    derived.validate()
    return derived
