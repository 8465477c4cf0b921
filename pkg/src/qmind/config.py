"""Experiment configuration: one YAML document drives every pipeline stage.

The effective (default-expanded) config is echoed into each output directory
so a run can always be reproduced from its artifacts.
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .classifiers import Hyperparams
from .dataplane import ServerConfig
from .features import N_FEATURES
from .qlearning import LearningConfig, RewardWeights, default_mask_family
from .runtime import DataplaneConfig, SiftConfig
from .traffic import AttackerConfig, BenignClientConfig, Scenario

CONFIG_SCHEMA_VERSION = 1

# independent streams so changing one stage never perturbs another
SEED_NAMES = ("traffic", "folds", "svm", "rf", "som", "epsilon", "sift")


class ConfigError(Exception):
    """Invalid or unreadable experiment configuration."""


class DataError(Exception):
    """Invalid dataset/model/report input data."""


@dataclass
class Seeds:
    traffic: int = 0
    folds: int = 1
    svm: int = 2
    rf: int = 3
    som: int = 4
    epsilon: int = 5
    sift: int = 6

    @classmethod
    def from_master(cls, master: int, overrides: Optional[dict[str, int]] = None) -> "Seeds":
        values = {name: master * 1000 + i for i, name in enumerate(SEED_NAMES)}
        values.update(overrides or {})
        return cls(**values)


@dataclass
class SiftSettings:
    threshold_fraction: float = 0.9  # of table capacity
    drop_fraction: float = 0.1

    def resolve(self, capacity: int) -> SiftConfig:
        return SiftConfig(
            threshold=max(1, int(self.threshold_fraction * capacity)),
            drop_batch=max(1, int(self.drop_fraction * capacity)),
        )


@dataclass
class DefenseSettings:
    collection_period: float = 5.0
    block_duration: float = 30.0
    debounce: int = 1


@dataclass
class ExperimentConfig:
    scenario: Scenario
    dataplane: DataplaneConfig = field(default_factory=DataplaneConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    window: float = 5.0  # feature window / stats collection interval, seconds
    feature_family: list[int] = field(default_factory=default_mask_family)
    learning: LearningConfig = field(default_factory=LearningConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    defense: DefenseSettings = field(default_factory=DefenseSettings)
    sift: SiftSettings = field(default_factory=SiftSettings)
    seeds: Seeds = field(default_factory=Seeds)
    master_seed: int = 0


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{context}: missing required key '{key}'")
    return mapping[key]


def _build(cls, mapping: dict, context: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context}: expected a mapping, got {type(mapping).__name__}")
    try:
        return cls(**mapping)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _parse_scenario(doc: dict) -> Scenario:
    raw = _require(doc, "scenario", "config")
    if not isinstance(raw, dict):
        raise ConfigError("scenario: expected a mapping")
    benign = [
        _build(
            BenignClientConfig,
            {
                **b,
                "dst_port_pool": list(b.get("dst_port_pool", [80])),
                "size_range": tuple(b.get("size_range", (200, 1400))),
            },
            f"scenario.benign[{i}]",
        )
        for i, b in enumerate(raw.get("benign", []))
    ]
    attackers = [
        _build(AttackerConfig, a, f"scenario.attackers[{i}]")
        for i, a in enumerate(raw.get("attackers", []))
    ]
    try:
        return Scenario(
            benign=benign,
            attackers=attackers,
            duration=float(_require(raw, "duration", "scenario")),
            server_ip=raw.get("server_ip", "10.0.0.1"),
            responses=bool(raw.get("responses", True)),
            tick=float(raw.get("tick", 0.1)),
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def _parse_weights(raw: dict) -> RewardWeights:
    names = {"precision": "w_pr", "recall": "w_re", "f_score": "w_fs",
             "accuracy": "w_ac", "false_alarm": "w_fa"}
    kwargs = {}
    for key, value in raw.items():
        if key not in names:
            raise ConfigError(f"weights: unknown metric '{key}'")
        kwargs[names[key]] = float(value)
    return _build(RewardWeights, kwargs, "weights")


def _parse_family(raw, context: str = "features.family") -> list[int]:
    if raw in (None, "default"):
        return default_mask_family()
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{context}: expected 'default' or a non-empty list of masks")
    masks = []
    for i, m in enumerate(raw):
        mask = int(m)
        if not 0 < mask < (1 << N_FEATURES) or bin(mask).count("1") < 2:
            raise ConfigError(f"{context}[{i}]: mask {m} must select 2..{N_FEATURES} features")
        masks.append(mask)
    if len(set(masks)) != len(masks):
        raise ConfigError(f"{context}: duplicate masks")
    return sorted(masks)


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    version = doc.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {version}")

    master = int(doc.get("seed", 0))
    seed_overrides = {k: int(v) for k, v in (doc.get("seeds") or {}).items() if k in SEED_NAMES}
    unknown = set(doc.get("seeds") or {}) - set(SEED_NAMES)
    if unknown:
        raise ConfigError(f"seeds: unknown stream(s) {sorted(unknown)}; valid: {list(SEED_NAMES)}")
    seeds = Seeds.from_master(master, seed_overrides)

    learning_raw = dict(doc.get("learning") or {})
    learning_raw.setdefault("seed", seeds.epsilon)
    features_raw = doc.get("features") or {}

    return ExperimentConfig(
        scenario=_parse_scenario(doc),
        dataplane=_build(DataplaneConfig, doc.get("dataplane") or {}, "dataplane"),
        server=_build(ServerConfig, doc.get("server") or {}, "server"),
        window=float(doc.get("window", 5.0)),
        feature_family=_parse_family(features_raw.get("family", "default")),
        learning=_build(LearningConfig, learning_raw, "learning"),
        weights=_parse_weights(doc.get("weights") or {}),
        hyperparams=_build(Hyperparams, _coerce_hyperparams(doc.get("classifier") or {}), "classifier"),
        defense=_build(DefenseSettings, doc.get("defense") or {}, "defense"),
        sift=_build(SiftSettings, doc.get("sift") or {}, "sift"),
        seeds=seeds,
        master_seed=master,
    )


def _coerce_hyperparams(raw: dict) -> dict:
    raw = dict(raw)
    if "som_grid" in raw:
        raw["som_grid"] = tuple(raw["som_grid"])
    return raw


def load_config(path, seed_override: Optional[int] = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if seed_override is not None:
        doc = dict(doc or {})
        doc["seed"] = seed_override
        doc.pop("seeds", None)
    return parse_config(doc)


def effective_doc(cfg: ExperimentConfig) -> dict:
    """Default-expanded config document; parse_config(effective_doc(c)) == c."""
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "seed": cfg.master_seed,
        "seeds": {name: getattr(cfg.seeds, name) for name in SEED_NAMES},
        "scenario": {
            "duration": cfg.scenario.duration,
            "server_ip": cfg.scenario.server_ip,
            "responses": cfg.scenario.responses,
            "tick": cfg.scenario.tick,
            "benign": [
                {
                    "src_ip": b.src_ip,
                    "request_rate": b.request_rate,
                    "flow_lifetime": b.flow_lifetime,
                    "dst_port_pool": list(b.dst_port_pool),
                    "tcp_fraction": b.tcp_fraction,
                    "packet_interval": b.packet_interval,
                    "size_range": list(b.size_range),
                }
                for b in cfg.scenario.benign
            ],
            "attackers": [
                {
                    "src_ip": a.src_ip,
                    "unique_rate": a.unique_rate,
                    "on_time": a.on_time,
                    "off_time": a.off_time,
                    "keepalive_interval": a.keepalive_interval,
                    "hold_connections": a.hold_connections,
                    "spoof_pool": list(a.spoof_pool) if a.spoof_pool else None,
                    "dst_port": a.dst_port,
                    "packet_size": a.packet_size,
                }
                for a in cfg.scenario.attackers
            ],
        },
        "dataplane": {
            "capacity": cfg.dataplane.capacity,
            "idle_timeout": cfg.dataplane.idle_timeout,
            "hard_timeout": cfg.dataplane.hard_timeout,
            "tick": cfg.dataplane.tick,
        },
        "server": {
            "slot_capacity": cfg.server.slot_capacity,
            "base_response_time": cfg.server.base_response_time,
            "penalty_coeff": cfg.server.penalty_coeff,
            "hold_duration": cfg.server.hold_duration,
            "service_duration": cfg.server.service_duration,
        },
        "window": cfg.window,
        "features": {"family": list(cfg.feature_family)},
        "learning": {
            "alpha": cfg.learning.alpha,
            "epsilon": cfg.learning.epsilon,
            "epsilon_decay": cfg.learning.epsilon_decay,
            "epsilon_floor": cfg.learning.epsilon_floor,
            "gamma": cfg.learning.gamma,
            "max_episodes": cfg.learning.max_episodes,
            "convergence_tol": cfg.learning.convergence_tol,
            "seed": cfg.learning.seed,
            "k_folds": cfg.learning.k_folds,
        },
        "weights": {
            "precision": cfg.weights.w_pr,
            "recall": cfg.weights.w_re,
            "f_score": cfg.weights.w_fs,
            "accuracy": cfg.weights.w_ac,
            "false_alarm": cfg.weights.w_fa,
        },
        "classifier": {
            "svm_epochs": cfg.hyperparams.svm_epochs,
            "svm_batch_size": cfg.hyperparams.svm_batch_size,
            "svm_lambda": cfg.hyperparams.svm_lambda,
            "svm_eta0": cfg.hyperparams.svm_eta0,
            "rf_trees": cfg.hyperparams.rf_trees,
            "rf_max_depth": cfg.hyperparams.rf_max_depth,
            "rf_min_split": cfg.hyperparams.rf_min_split,
            "som_grid": list(cfg.hyperparams.som_grid),
            "som_epochs": cfg.hyperparams.som_epochs,
            "som_eta0": cfg.hyperparams.som_eta0,
            "som_eta_end": cfg.hyperparams.som_eta_end,
            "som_sigma_end": cfg.hyperparams.som_sigma_end,
        },
        "defense": {
            "collection_period": cfg.defense.collection_period,
            "block_duration": cfg.defense.block_duration,
            "debounce": cfg.defense.debounce,
        },
        "sift": {
            "threshold_fraction": cfg.sift.threshold_fraction,
            "drop_fraction": cfg.sift.drop_fraction,
        },
    }


def atomic_write_text(path, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def echo_config(cfg: ExperimentConfig, out_dir) -> None:
    atomic_write_text(Path(out_dir) / "effective_config.yaml",
                      yaml.safe_dump(effective_doc(cfg), sort_keys=False))
