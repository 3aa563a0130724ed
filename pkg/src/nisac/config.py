"""Run configuration: one TOML or JSON file covering every module.

Sections mirror the modules (``scene``, ``channel``, ``arrays``, ``link``,
``map``, ``estimator``, ``features``, ``cnn``, ``train``, ``dataset``,
``eval``). Unknown keys are rejected so typos fail loudly. Command-line
overrides use dotted paths, e.g. ``train.epochs=5``.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .channel_model import ChannelConfig, ula
from .features import FeatureKind, Fusion
from .geometry_maps import MapRepr, make_grid
from .ofdm_link import GridConfig
from .scene_gen import SceneConfig
from .sensing_estimator import EstimatorConfig


class ConfigError(ValueError):
    pass


@dataclass
class ArrayConfig:
    n_tx: int = 8
    n_rx: int = 8


@dataclass
class LinkConfig:
    n_rb: int = 20
    symbols_per_rb: int = 14
    pilot_symbols: tuple = (3, 12)
    guard_low: int = 5
    guard_high: int = 6
    null_dc: bool = True
    constellation: str = "qpsk"


@dataclass
class MapConfig:
    representation: str = "probability"
    roi_min: tuple = (-2.5, -2.5)
    roi_max: tuple = (2.5, 2.5)
    cells_per_side: int = 5

    def __post_init__(self):
        self.representation = MapRepr(self.representation).value


@dataclass
class FeatureConfig:
    kind: str = "beam_delay"
    fusion: str = "sub"
    normalize: bool = True

    def __post_init__(self):
        self.kind = FeatureKind(self.kind).value
        self.fusion = Fusion(self.fusion).value


@dataclass
class NetConfig:
    n_residual_blocks: int = 4
    widths: tuple = (16, 16, 32, 32)
    stem_width: int = 16
    residual_gain: float = 0.1


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 1024
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    val_fraction: float = 0.1
    cache_features: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass
class DatasetConfig:
    n_samples: int = 1000
    seed: int = 0
    env_seed: int = 1234
    test_ratio: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.test_ratio < 1.0:
            raise ValueError("test_ratio must lie in (0, 1)")


@dataclass
class EvalConfig:
    pr_thresholds: int = 200
    hard_threshold: float = 0.2


@dataclass
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    arrays: ArrayConfig = field(default_factory=ArrayConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    map: MapConfig = field(default_factory=MapConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    cnn: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    # ---- derived objects

    def grid_config(self) -> GridConfig:
        l = self.link
        return GridConfig(
            n_streams=self.scene.n_ues, n_subcarriers=self.channel.n_subcarriers, n_rb=l.n_rb,
            symbols_per_rb=l.symbols_per_rb, pilot_symbols=l.pilot_symbols, guard_low=l.guard_low,
            guard_high=l.guard_high, null_dc=l.null_dc, constellation=l.constellation)

    def map_grid(self):
        return make_grid(self.map.roi_min, self.map.roi_max, self.map.cells_per_side)

    def scene_config(self) -> SceneConfig:
        sc = copy.deepcopy(self.scene)
        sc.seed = self.dataset.seed
        return sc

    def tx_array(self):
        return ula(self.scene.tx_center, self.arrays.n_tx, self.channel.carrier_freq_hz)

    def rx_array(self):
        return ula(self.scene.rx_center, self.arrays.n_rx, self.channel.carrier_freq_hz)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def data_hash(self) -> str:
        """Hash of every setting that changes dataset contents."""
        d = self.to_dict()
        d["scene"].pop("seed", None)
        keep = {k: d[k] for k in ("scene", "channel", "arrays", "link", "map")}
        keep["dataset"] = {"seed": self.dataset.seed, "env_seed": self.dataset.env_seed}
        blob = json.dumps(keep, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def validate(self) -> None:
        self.grid_config()
        self.map_grid()
        if self.scene.n_ues > self.arrays.n_tx:
            raise ConfigError("ZF precoding needs n_ues <= n_tx")


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{path}' must be a table")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{path}': {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[key] = _build(sub, value, f"{path}.{key}" if path else key)
        else:
            kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{path or 'config'}': {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib

            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return from_dict(data)


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def with_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Copy of ``cfg`` with dotted-path keys replaced."""
    d = cfg.to_dict()
    for key, value in overrides.items():
        parts = key.split(".")
        node = d
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown config path '{key}'")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config path '{key}'")
        node[parts[-1]] = value
    return from_dict(d)
