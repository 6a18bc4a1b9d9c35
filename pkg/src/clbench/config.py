"""Layered experiment configuration: load, merge, validate.

Configs are YAML trees. A defaults tree is loaded first, the user file is
deep-merged on top (override wins at leaves, lists replace wholesale), and
``--set key=value`` leaf overrides are applied last. The merged tree is
frozen into an immutable :class:`ExperimentConfig`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

SEMANTIC_SETTINGS = ("traditional", "cross_domain", "category_randomized")
SCENARIOS = ("task_aware", "task_agnostic")
BUFFER_STRATEGIES = ("reservoir", "balanced_random", "herding")

# Documented defaults; the experiment file only needs to override what differs.
# Default optimizer is plain SGD, lr 0.1, constant schedule.
DEFAULT_TREE: dict[str, Any] = {
    "dataset_names": [],
    "semantic_setting": "traditional",
    "init_cls_num": 0,
    "inc_cls_num": 2,
    "task_num": 5,
    "scenario": "task_agnostic",
    "online": False,
    "epochs": 1,
    "batch_size": 10,
    "method": "finetune",
    "method_params": {},
    "buffer": {"strategy": "reservoir", "capacity": 0},
    "optimizer": {"name": "sgd", "learning_rate": 0.1, "decay_schedule": "constant"},
    "model": {"arch": "mlp2", "hidden": [100, 100], "feature_dim": 64},
    "seed": 0,
    "output_dir": "runs",
}


@dataclass(frozen=True)
class BufferConfig:
    strategy: str = "reservoir"
    capacity: int = 0
    budget_bytes: int | None = None


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = "sgd"
    learning_rate: float = 0.1
    decay_schedule: str = "constant"
    decay_gamma: float = 0.1


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "mlp2"
    hidden: tuple[int, ...] = (100, 100)
    feature_dim: int = 64


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable descriptor of one experiment."""

    dataset_names: tuple[str, ...]
    semantic_setting: str
    init_cls_num: int
    inc_cls_num: int
    task_num: int
    scenario: str
    online: bool
    epochs: int
    batch_size: int
    method: str
    method_params: Mapping[str, Any]
    buffer: BufferConfig
    optimizer: OptimizerConfig
    model: ModelConfig
    seed: int
    output_dir: str

    def to_tree(self) -> dict[str, Any]:
        """Plain YAML-serializable tree, inverse of ``config_from_tree``."""
        return {
            "dataset_names": list(self.dataset_names),
            "semantic_setting": self.semantic_setting,
            "init_cls_num": self.init_cls_num,
            "inc_cls_num": self.inc_cls_num,
            "task_num": self.task_num,
            "scenario": self.scenario,
            "online": self.online,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "method": self.method,
            "method_params": dict(self.method_params),
            "buffer": {
                "strategy": self.buffer.strategy,
                "capacity": self.buffer.capacity,
                "budget_bytes": self.buffer.budget_bytes,
            },
            "optimizer": {
                "name": self.optimizer.name,
                "learning_rate": self.optimizer.learning_rate,
                "decay_schedule": self.optimizer.decay_schedule,
                "decay_gamma": self.optimizer.decay_gamma,
            },
            "model": {
                "arch": self.model.arch,
                "hidden": list(self.model.hidden),
                "feature_dim": self.model.feature_dim,
            },
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def merge_configs(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Deep-merge two config trees; override wins at leaf level.

    Maps merge recursively, lists replace wholesale, scalars replace.
    A map-vs-scalar conflict at a shared key raises ``ConfigError`` naming
    the key path.
    """
    return _merge(base, override, path="")


def _merge(base: Mapping[str, Any], override: Mapping[str, Any], path: str) -> dict[str, Any]:
    out: dict[str, Any] = {k: copy.deepcopy(v) for k, v in base.items()}
    for key, value in override.items():
        key_path = f"{path}.{key}" if path else key
        if key in out:
            a, b = out[key], value
            a_is_map, b_is_map = isinstance(a, Mapping), isinstance(b, Mapping)
            if a_is_map and b_is_map:
                out[key] = _merge(a, b, key_path)
                continue
            if a_is_map != b_is_map:
                raise ConfigError("type conflict between map and scalar", key_path)
        out[key] = copy.deepcopy(value)
    return out


def _read_yaml_tree(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        tree = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} failed to parse: {exc}") from exc
    if tree is None:
        return {}
    if not isinstance(tree, dict):
        raise ConfigError(f"config file {path} must contain a key/value mapping")
    return tree


def parse_set_override(expr: str) -> dict[str, Any]:
    """Turn ``a.b.c=value`` into a single-leaf tree; values parse as YAML scalars."""
    if "=" not in expr:
        raise ConfigError(f"--set expects key=value, got '{expr}'")
    key, _, raw = expr.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"--set expects key=value, got '{expr}'")
    value = yaml.safe_load(raw)
    tree: dict[str, Any] = {}
    node = tree
    parts = key.split(".")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return tree


def load_config(
    path: str | Path,
    defaults_path: str | Path | None = None,
    overrides: list[str] | None = None,
) -> ExperimentConfig:
    """Load a config file over the defaults layer and freeze the result.

    Load order: built-in defaults, optional defaults file, the user file,
    then ``--set`` leaf overrides.
    """
    tree: dict[str, Any] = copy.deepcopy(DEFAULT_TREE)
    if defaults_path is not None:
        tree = merge_configs(tree, _read_yaml_tree(Path(defaults_path)))
    tree = merge_configs(tree, _read_yaml_tree(Path(path)))
    for expr in overrides or []:
        tree = merge_configs(tree, parse_set_override(expr))
    return config_from_tree(tree)


def _require(tree: Mapping[str, Any], key: str, types: tuple[type, ...], path: str) -> Any:
    value = tree[key]
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"expected {types[0].__name__}, got bool", path)
    if not isinstance(value, types):
        raise ConfigError(
            f"expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}", path
        )
    return value


def config_from_tree(tree: Mapping[str, Any]) -> ExperimentConfig:
    """Freeze a merged tree into an ``ExperimentConfig``, checking the schema."""
    unknown = set(tree) - set(DEFAULT_TREE)
    if unknown:
        raise ConfigError("unknown top-level key", sorted(unknown)[0])
    full = merge_configs(DEFAULT_TREE, tree)

    datasets = _require(full, "dataset_names", (list,), "dataset_names")
    if not all(isinstance(d, str) for d in datasets):
        raise ConfigError("dataset names must be strings", "dataset_names")

    semantic = _require(full, "semantic_setting", (str,), "semantic_setting")
    if semantic not in SEMANTIC_SETTINGS:
        raise ConfigError(f"must be one of {SEMANTIC_SETTINGS}", "semantic_setting")
    scenario = _require(full, "scenario", (str,), "scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"must be one of {SCENARIOS}", "scenario")

    init_cls = _require(full, "init_cls_num", (int,), "init_cls_num")
    if init_cls < 0:
        raise ConfigError("must be >= 0", "init_cls_num")
    inc_cls = _require(full, "inc_cls_num", (int,), "inc_cls_num")
    if inc_cls <= 0:
        raise ConfigError("must be > 0", "inc_cls_num")
    task_num = _require(full, "task_num", (int,), "task_num")
    if task_num <= 0:
        raise ConfigError("must be > 0", "task_num")
    epochs = _require(full, "epochs", (int,), "epochs")
    if epochs <= 0:
        raise ConfigError("must be > 0", "epochs")
    batch_size = _require(full, "batch_size", (int,), "batch_size")
    if batch_size <= 0:
        raise ConfigError("must be > 0", "batch_size")
    online = _require(full, "online", (bool,), "online")

    method = _require(full, "method", (str,), "method")
    method_params = _require(full, "method_params", (dict,), "method_params")

    btree = _require(full, "buffer", (dict,), "buffer")
    strategy = btree.get("strategy", "reservoir")
    if strategy not in BUFFER_STRATEGIES:
        raise ConfigError(f"must be one of {BUFFER_STRATEGIES}", "buffer.strategy")
    capacity = btree.get("capacity", 0)
    if not isinstance(capacity, int) or capacity < 0:
        raise ConfigError("must be a non-negative integer", "buffer.capacity")
    buffer = BufferConfig(strategy=strategy, capacity=capacity, budget_bytes=btree.get("budget_bytes"))

    otree = _require(full, "optimizer", (dict,), "optimizer")
    optimizer = OptimizerConfig(
        name=otree.get("name", "sgd"),
        learning_rate=float(otree.get("learning_rate", 0.1)),
        decay_schedule=otree.get("decay_schedule", "constant"),
        decay_gamma=float(otree.get("decay_gamma", 0.1)),
    )
    if optimizer.name != "sgd":
        raise ConfigError("only 'sgd' is supported", "optimizer.name")
    if optimizer.decay_schedule not in ("constant", "step"):
        raise ConfigError("must be 'constant' or 'step'", "optimizer.decay_schedule")

    mtree = _require(full, "model", (dict,), "model")
    model = ModelConfig(
        arch=mtree.get("arch", "mlp2"),
        hidden=tuple(mtree.get("hidden", [100, 100])),
        feature_dim=int(mtree.get("feature_dim", 64)),
    )

    seed = _require(full, "seed", (int,), "seed")
    output_dir = _require(full, "output_dir", (str,), "output_dir")

    return ExperimentConfig(
        dataset_names=tuple(datasets),
        semantic_setting=semantic,
        init_cls_num=init_cls,
        inc_cls_num=inc_cls,
        task_num=task_num,
        scenario=scenario,
        online=online,
        epochs=epochs,
        batch_size=batch_size,
        method=method,
        method_params=dict(method_params),
        buffer=buffer,
        optimizer=optimizer,
        model=model,
        seed=seed,
        output_dir=output_dir,
    )


def validate_config(cfg: ExperimentConfig, catalog_summary: Mapping[str, int]) -> ExperimentConfig:
    """Check cross-field invariants against the available class counts.

    ``catalog_summary`` maps dataset name to its class count. Returns ``cfg``
    unchanged on success.
    """
    if cfg.online and cfg.epochs != 1:
        raise ConfigError("an online run requires epochs=1", "epochs")
    missing = [d for d in cfg.dataset_names if d not in catalog_summary]
    if missing:
        raise ConfigError(f"dataset '{missing[0]}' not in catalog summary", "dataset_names")
    total = sum(catalog_summary[d] for d in cfg.dataset_names)

    if cfg.semantic_setting == "cross_domain":
        if cfg.task_num != len(cfg.dataset_names):
            raise ConfigError(
                f"cross_domain needs task_num == number of datasets "
                f"({cfg.task_num} != {len(cfg.dataset_names)})",
                "task_num",
            )
        return cfg

    if cfg.semantic_setting == "category_randomized":
        if cfg.init_cls_num != 0:
            raise ConfigError("category_randomized uses equal blocks; set init_cls_num=0", "init_cls_num")
        if cfg.inc_cls_num * cfg.task_num > total:
            raise ConfigError(
                f"partition overflow: {cfg.inc_cls_num} x {cfg.task_num} > {total} pooled classes",
                "inc_cls_num",
            )
        if total % cfg.task_num != 0:
            raise ConfigError(
                f"pooled class count {total} not divisible by task_num {cfg.task_num}", "task_num"
            )
        if cfg.inc_cls_num != total // cfg.task_num:
            raise ConfigError(
                f"inc_cls_num must equal {total}//{cfg.task_num}={total // cfg.task_num}",
                "inc_cls_num",
            )
        return cfg

    # traditional
    if cfg.init_cls_num > 0:
        demand = cfg.init_cls_num + cfg.inc_cls_num * (cfg.task_num - 1)
    else:
        demand = cfg.inc_cls_num * cfg.task_num
    if demand > total:
        raise ConfigError(
            f"requested partition needs {demand} classes but only {total} available",
            "init_cls_num" if cfg.init_cls_num > 0 else "inc_cls_num",
        )
    return cfg


def write_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_tree(), sort_keys=True), encoding="utf-8")
